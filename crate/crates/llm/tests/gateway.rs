use std::sync::Arc;
use std::time::Duration;

use cdsim_core::agents::{build_team, DisasterView, Diversity, ExternalPolicy, Observation, PolicyKind, ScenarioView};
use cdsim_core::consensus::ConsensusMode;
use cdsim_core::env::disaster::SituationReport;
use cdsim_core::env::Scenario;
use cdsim_core::GridCell;
use cdsim_llm::fake::prompt_of;
use cdsim_llm::policy::CORRECTIVE_SUFFIX;
use cdsim_llm::{ChatClient, EndpointConfig, FakeEndpoint, FakeReply, GatewayError, LlmPolicy, Phase, PromptOptions};

const GOOD: &str = r#"{"analysis": "fire nearby", "action": [3,4], "message": "heading to [3,4]"}"#;

fn cfg(url: String) -> EndpointConfig {
    EndpointConfig { base_url: url, timeout_ms: 2_000, backoff_ms: 10, api_key_env: "CDSIM_TEST_UNSET_KEY".into(), ..EndpointConfig::default() }
}

fn obs() -> Observation {
    Observation {
        round: 1,
        team_size: 3,
        consensus: ConsensusMode::Implicit,
        view: ScenarioView::Disaster(DisasterView {
            report: SituationReport::from_lines(vec![]),
            position: GridCell { x: 0, y: 0 },
            infra_cells: vec![],
        }),
        transcript: vec![],
        own_last_action: None,
    }
}

#[test]
fn happy_path_embeds_sampling_parameters() {
    let fake = FakeEndpoint::start(|_, _| FakeReply::Content(GOOD.into())).unwrap();
    let client = ChatClient::new(cfg(fake.base_url()));
    let c = client.complete("hello there").unwrap();
    assert_eq!(c.text, GOOD);
    assert!(c.retries.is_empty());
    assert_eq!(c.usage.unwrap().prompt_tokens, 2);
    let req = &fake.requests()[0];
    assert_eq!(req["temperature"], 0.7);
    assert_eq!(req["max_tokens"], 256);
    assert_eq!(prompt_of(req), "hello there");
}

#[test]
fn two_timeouts_then_success() {
    let fake = FakeEndpoint::start(|i, _| {
        let ok = FakeReply::Content(GOOD.into());
        if i < 2 {
            FakeReply::Delayed(Duration::from_millis(600), Box::new(ok))
        } else {
            ok
        }
    })
    .unwrap();
    let client = ChatClient::new(EndpointConfig { timeout_ms: 200, ..cfg(fake.base_url()) });
    let c = client.complete("x").unwrap();
    assert_eq!(c.text, GOOD);
    assert_eq!(c.retries.len(), 2);
    assert_eq!(c.retries[1].backoff_ms, 2 * c.retries[0].backoff_ms);
}

#[test]
fn server_errors_are_retried_and_client_errors_are_not() {
    let fake = FakeEndpoint::start(|i, _| if i == 0 { FakeReply::Status(503) } else { FakeReply::Content(GOOD.into()) }).unwrap();
    let c = ChatClient::new(cfg(fake.base_url())).complete("x").unwrap();
    assert_eq!(c.retries.len(), 1);

    let fake = FakeEndpoint::start(|_, _| FakeReply::Status(401)).unwrap();
    let e = ChatClient::new(cfg(fake.base_url())).complete("x").unwrap_err();
    assert!(matches!(e, GatewayError::Rejected(401)));
    assert_eq!(fake.request_count(), 1);
}

#[test]
fn endpoint_down_fails_after_max_retries() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let client = ChatClient::new(cfg(format!("http://127.0.0.1:{port}/v1")));
    match client.complete("x").unwrap_err() {
        GatewayError::Unavailable { attempts, .. } => assert_eq!(attempts, 3),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn concurrency_cap_holds() {
    let fake = FakeEndpoint::start(|_, _| FakeReply::Delayed(Duration::from_millis(50), Box::new(FakeReply::Content(GOOD.into())))).unwrap();
    let client = Arc::new(ChatClient::new(EndpointConfig { concurrency: 2, ..cfg(fake.base_url()) }));
    std::thread::scope(|s| {
        for _ in 0..8 {
            let c = Arc::clone(&client);
            s.spawn(move || c.complete("x").unwrap());
        }
    });
    assert_eq!(fake.request_count(), 8);
    assert!(fake.peak_concurrency() <= 2, "peak {}", fake.peak_concurrency());
}

#[test]
fn malformed_reply_gets_one_corrective_prompt() {
    let fake = FakeEndpoint::start(|_, body| {
        if prompt_of(body).ends_with(CORRECTIVE_SUFFIX) {
            FakeReply::Content(GOOD.into())
        } else {
            FakeReply::Content("I think we should go to 3,4.".into())
        }
    })
    .unwrap();
    let team = build_team(Scenario::Disaster, Diversity::Medium, 3, PolicyKind::Llm, 0.0);
    let policy = LlmPolicy::new(cfg(fake.base_url()), PromptOptions::default());
    let a = policy.action(&team[0], &obs()).unwrap();
    assert_eq!(a.as_cell(), Some(GridCell { x: 3, y: 4 }));
    let stats = policy.stats();
    assert_eq!((stats.requests, stats.reprompts, stats.parse_failures), (2, 1, 0));
    let log = policy.take_transcript();
    assert_eq!(log.len(), 2);
    assert_eq!((log[0].attempt, log[1].attempt), (1, 2));
    assert_eq!(log[0].phase, Phase::Action);
    assert!(log[1].prompt.contains("I think we should go to 3,4."));
    assert!(policy.take_transcript().is_empty());
}

#[test]
fn persistent_garbage_is_an_error() {
    let fake = FakeEndpoint::start(|_, _| FakeReply::Content(r#"{"action": [42, 1]}"#.into())).unwrap();
    let team = build_team(Scenario::Disaster, Diversity::Low, 1, PolicyKind::Llm, 0.0);
    let policy = LlmPolicy::new(cfg(fake.base_url()), PromptOptions::default());
    assert!(policy.message(&team[0], &obs()).is_err());
    let s = policy.stats();
    assert_eq!((s.requests, s.reprompts, s.parse_failures), (2, 1, 1));
}

#[test]
fn per_agent_override_routes_elsewhere() {
    let a = FakeEndpoint::start(|_, _| FakeReply::Content(GOOD.into())).unwrap();
    let b = FakeEndpoint::start(|_, _| FakeReply::Content(GOOD.replace("[3,4]", "[5,5]"))).unwrap();
    let team = build_team(Scenario::Disaster, Diversity::Medium, 2, PolicyKind::Llm, 0.0);
    let policy = LlmPolicy::new(cfg(a.base_url()), PromptOptions::default())
        .with_override(1, EndpointConfig { model: "other".into(), ..cfg(b.base_url()) });
    assert_eq!(policy.action(&team[0], &obs()).unwrap().as_cell(), Some(GridCell { x: 3, y: 4 }));
    assert_eq!(policy.action(&team[1], &obs()).unwrap().as_cell(), Some(GridCell { x: 5, y: 5 }));
    assert_eq!(b.requests()[0]["model"], "other");
}
