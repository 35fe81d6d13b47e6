#![allow(dead_code)]

use std::net::SocketAddr;

use permreg::data::{generate_planted, split, to_csv, PlantedSpec, PlantedTerm, SplitSpec, Splits};
use permreg::session::Session;
use permreg::{Constraint, Hyperparams};
use permreg_server::{AppState, ErrorBody, ServerConfig, SessionView};
use serde_json::{json, Value};

pub async fn spawn_server(config: ServerConfig) -> String {
    let listener = tokio::net::TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], 0)))
        .await
        .unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(permreg_server::serve_on(listener, AppState::new(config)));
    format!("http://{addr}")
}

pub fn planted_splits(seed: u64) -> Splits {
    let ds = generate_planted(&PlantedSpec {
        n_items: 5,
        m_rows: 160,
        mu0: 1.0,
        planted: vec![
            PlantedTerm {
                constraint: Constraint::new(vec![2, 5, 1]).unwrap(),
                coefficient: 0.5,
            },
            PlantedTerm {
                constraint: Constraint::pair(3, 4).unwrap(),
                coefficient: -0.3,
            },
        ],
        noise_sd: 0.1,
        seed,
    })
    .unwrap();
    split(
        &ds,
        &SplitSpec {
            train: 100,
            validation: 30,
            test: 30,
            seed,
        },
    )
    .unwrap()
}

#[derive(Debug, Clone, Copy)]
pub enum Step {
    ExpandActive(usize),
    CollapseInactive(usize),
    Simplify,
    Restart(usize),
    Revert(usize),
    RevertBest,
    Finalize,
}

/// Ten actions covering every mutating endpoint.
pub const SCRIPT: [Step; 10] = [
    Step::ExpandActive(0),
    Step::ExpandActive(1),
    Step::CollapseInactive(0),
    Step::Simplify,
    Step::ExpandActive(0),
    Step::Restart(3),
    Step::ExpandActive(2),
    Step::Revert(1),
    Step::RevertBest,
    Step::Finalize,
];

/// Resolves a step against the current view into a path and a body.
pub fn request_for(step: Step, view: &SessionView) -> (&'static str, Value) {
    let pick = |active: bool, k: usize| {
        let ids: Vec<u64> = view
            .nodes
            .iter()
            .filter(|n| n.active == active)
            .map(|n| n.id)
            .collect();
        ids[k % ids.len()]
    };
    match step {
        Step::ExpandActive(k) => ("expand", json!({ "node_id": pick(true, k) })),
        Step::CollapseInactive(k) => ("collapse", json!({ "node_id": pick(false, k) })),
        Step::Simplify => ("simplify", Value::Null),
        Step::Restart(l) => (
            "restart",
            json!({ "hyperparams": { "l": l, "learning_rate": 1.0 } }),
        ),
        Step::Revert(i) => ("revert", json!({ "iteration": i })),
        Step::RevertBest => ("revert", json!({ "iteration": view.best_index })),
        Step::Finalize => ("finalize", Value::Null),
    }
}

/// Applies the same request to an in-process session.
pub fn apply_local(s: &mut Session, verb: &str, body: &Value) -> Result<(), String> {
    let node = || body["node_id"].as_u64().unwrap();
    let r = match verb {
        "expand" => s.expand(node()).map(drop),
        "collapse" => s.collapse(node()).map(drop),
        "simplify" => s.simplify().map(drop),
        "restart" => s
            .restart(serde_json::from_value::<Hyperparams>(body["hyperparams"].clone()).unwrap())
            .map(drop),
        "revert" => s
            .revert(body["iteration"].as_u64().unwrap() as usize)
            .map(drop),
        "finalize" => s.finalize().map(drop),
        other => panic!("unknown verb {other}"),
    };
    r.map_err(|e| e.code().to_owned())
}

/// Replays [`SCRIPT`] over HTTP and in process, returning the first mismatch.
pub async fn replay_matches(base: &str, seed: u64) -> Result<usize, String> {
    let client = reqwest::Client::new();
    let splits = planted_splits(seed);
    let hp = Hyperparams::new(2, 1.0).unwrap();
    let created = client
        .post(format!("{base}/v1/sessions"))
        .json(&json!({
            "hyperparams": hp,
            "train": { "csv": to_csv(&splits.train) },
            "validation": { "csv": to_csv(&splits.validation) },
            "test": { "csv": to_csv(&splits.test) },
        }))
        .send()
        .await
        .map_err(|e| e.to_string())?;
    if created.status() != 201 {
        return Err(format!("create returned {}", created.status()));
    }
    let mut view: SessionView = created.json().await.map_err(|e| e.to_string())?;
    let id = view.session_id.clone();
    let mut local = Session::create(splits.train, splits.validation, splits.test, hp).unwrap();
    if view != SessionView::of(&id, &local) {
        return Err("initial view differs".into());
    }
    let mut compared = 1;
    for step in SCRIPT {
        let (verb, body) = request_for(step, &view);
        let mut req = client.post(format!("{base}/v1/sessions/{id}/{verb}"));
        if !body.is_null() {
            req = req.json(&body);
        }
        let resp = req.send().await.map_err(|e| e.to_string())?;
        let status = resp.status();
        let local_result = apply_local(&mut local, verb, &body);
        match local_result {
            Ok(()) => {
                if !status.is_success() {
                    return Err(format!("{verb}: http {status}, local ok"));
                }
                view = resp.json().await.map_err(|e| e.to_string())?;
                let expect = SessionView::of(&id, &local);
                if view != expect {
                    return Err(format!(
                        "{verb}: views differ\nhttp:  {view:?}\nlocal: {expect:?}"
                    ));
                }
            }
            Err(code) => {
                let err: ErrorBody = resp.json().await.map_err(|e| e.to_string())?;
                if err.code != code {
                    return Err(format!("{verb}: http code {} vs local {code}", err.code));
                }
            }
        }
        compared += 1;
        let got: SessionView = client
            .get(format!("{base}/v1/sessions/{id}"))
            .send()
            .await
            .map_err(|e| e.to_string())?
            .json()
            .await
            .map_err(|e| e.to_string())?;
        if got != view {
            return Err(format!("GET after {verb} differs from mutation response"));
        }
    }
    Ok(compared)
}
