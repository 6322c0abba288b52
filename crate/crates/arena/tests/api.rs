use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use ragkit_arena::{router, Arena, ArenaError, BattleState, Choice};
use ragkit_core::backend::{ChatSettings, RetryPolicy};
use ragkit_core::corpus::{Segment, SegmentStore};
use ragkit_core::pipeline::{BackendRegistry, Corpus, Pipeline, PipelineConfig, RemoteBackend, RemoteKind};
use ragkit_core::ragio::{validate, RagResponse};
use ragkit_core::retrieval::build_index;
use serde_json::{json, Value};
use tower::ServiceExt;

const TEXTS: &[(&str, &str, &str)] = &[
    ("wall#0", "The Wall", "The album grew out of the band's 1977 tour. Roger Waters felt alienated from the audience."),
    ("wall#1", "The Wall", "Waters spat at a fan during a concert in Montreal. The incident inspired the idea of a wall."),
    ("potty#0", "Potty training", "Toddlers usually pee four to eight times per day. Take them to the potty after meals."),
    ("potty#1", "Potty training", "Plan bathroom trips every two hours. Stay calm when accidents happen."),
];

fn corpus() -> Arc<Corpus> {
    let segs: Vec<Segment> = TEXTS
        .iter()
        .map(|(id, title, text)| {
            Segment::from_json_line(
                &json!({"docid": id, "url": format!("https://example.org/{id}"), "title": title, "headings": "",
                        "segment": text, "start_char": 0, "end_char": text.chars().count()})
                .to_string(),
            )
            .unwrap()
        })
        .collect();
    Arc::new(Corpus {
        index: build_index(&segs).unwrap(),
        store: SegmentStore::from_segments(segs).unwrap(),
    })
}

fn down_registry() -> BackendRegistry {
    let settings = ChatSettings {
        url: "http://127.0.0.1:9/v1/chat/completions".into(),
        model: "offline-model-x".into(),
        api_key_env: None,
        temperature: 0.0,
        timeout_secs: 2,
        concurrency: 1,
        retry: RetryPolicy { attempts: 1, base_delay_ms: 1 },
    };
    BackendRegistry::from([("remote-gen".to_string(), RemoteBackend { kind: RemoteKind::Chat, settings, max_window: 20 })])
}

fn arena_with(log: Option<std::path::PathBuf>) -> Arena {
    let reg = down_registry();
    let mut span = PipelineConfig::mock("pipe-beta");
    span.generator.backend = "mock-span".into();
    let mut down = PipelineConfig::mock("pipe-down");
    down.generator.backend = "remote-gen".into();
    let mut down2 = PipelineConfig::mock("pipe-down2");
    down2.generator.backend = "remote-gen".into();
    let pipelines = [PipelineConfig::mock("pipe-alpha"), span, down, down2]
        .into_iter()
        .map(|c| Pipeline::build(c, &reg).unwrap())
        .collect();
    Arena::new(pipelines, corpus(), 42, log).unwrap()
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

/// Runs `f` on a fresh runtime. The arena is dropped outside the runtime
/// because its blocking HTTP clients cannot be dropped in async context.
fn with_arena<F, Fut>(f: F)
where
    F: FnOnce(Arc<Arena>) -> Fut,
    Fut: std::future::Future<Output = ()>,
{
    let arena = Arc::new(arena_with(None));
    let rt = tokio::runtime::Runtime::new().unwrap();
    rt.block_on(f(arena.clone()));
    drop(rt);
}

/// Everything that identifies the pipelines behind a battle.
fn identity_strings(arena: &Arena) -> Vec<String> {
    let mut v = Vec::new();
    for p in arena.pipelines() {
        v.push(p.id.clone());
        v.push(p.reranker.clone());
        v.push(p.generator.clone());
    }
    v.push("offline-model-x".into());
    v
}

#[test]
fn blinded_battle_reveals_only_after_vote() {
    with_arena(|arena| async move {
        let app = router(arena.clone());
        let (status, created) = call(
            &app,
            "POST",
            "/api/arena/battles",
            Some(json!({"topic": "what inspired the wall?", "left": "pipe-alpha", "right": "pipe-beta", "blinded": true})),
        )
        .await;
        assert_eq!(status, StatusCode::CREATED);
        let id = created["battle_id"].as_str().unwrap().to_string();
        let (_, fetched) = call(&app, "GET", &format!("/api/arena/battles/{id}"), None).await;
        for payload in [&created, &fetched] {
            let text = payload.to_string();
            for s in identity_strings(&arena) {
                assert!(!text.contains(&s), "{s:?} leaked in {text}");
            }
            assert_eq!(payload["state"], "answered");
            for side in payload["sides"].as_array().unwrap() {
                let r: RagResponse = serde_json::from_value(side["response"].clone()).unwrap();
                assert!(validate(&r).is_empty());
            }
        }
        let (status, revealed) = call(&app, "POST", &format!("/api/arena/battles/{id}/vote"), Some(json!({"choice": "left"}))).await;
        assert_eq!(status, StatusCode::OK);
        let text = revealed.to_string();
        assert!(text.contains("pipe-alpha") && text.contains("pipe-beta"));
        let (status, again) = call(&app, "POST", &format!("/api/arena/battles/{id}/vote"), Some(json!({"choice": "right"}))).await;
        assert_eq!(status, StatusCode::CONFLICT);
        assert_eq!(again["error"], "already voted");
        let (_, board) = call(&app, "GET", "/api/arena/leaderboard", None).await;
        let wins: u64 = board.as_array().unwrap().iter().map(|e| e["wins"].as_u64().unwrap()).sum();
        assert_eq!(wins, 1);
    });
}

#[test]
fn unblinded_battle_names_pipelines() {
    with_arena(|arena| async move {
        let app = router(arena.clone());
        let (_, v) = call(
            &app,
            "POST",
            "/api/arena/battles",
            Some(json!({"topic": "potty training", "left": "pipe-alpha", "right": "pipe-alpha", "blinded": false})),
        )
        .await;
        assert_eq!(v["sides"][0]["label"], "pipe-alpha");
        assert_eq!(v["sides"][1]["pipeline"], "pipe-alpha");
    });
}

#[test]
fn unknown_pipeline_and_battle() {
    with_arena(|arena| async move {
        let app = router(arena.clone());
        let (s, _) = call(&app, "POST", "/api/arena/battles", Some(json!({"topic": "x", "left": "nope", "right": "pipe-alpha"}))).await;
        assert_eq!(s, StatusCode::BAD_REQUEST);
        let (s, _) = call(&app, "GET", "/api/arena/battles/b999999", None).await;
        assert_eq!(s, StatusCode::NOT_FOUND);
        let (s, _) = call(&app, "POST", "/api/arena/battles", Some(json!({"topic": "  ", "left": "pipe-alpha", "right": "pipe-alpha"}))).await;
        assert_eq!(s, StatusCode::BAD_REQUEST);
    });
}

#[test]
fn one_side_down_other_side_answers() {
    with_arena(|arena| async move {
        let app = router(arena.clone());
        let (status, v) = call(
            &app,
            "POST",
            "/api/arena/battles",
            Some(json!({"topic": "potty training", "left": "pipe-alpha", "right": "pipe-down", "blinded": true})),
        )
        .await;
        assert_eq!(status, StatusCode::CREATED);
        let sides = v["sides"].as_array().unwrap();
        assert_eq!(sides.iter().filter(|s| s.get("response").is_some()).count(), 1);
        assert_eq!(sides.iter().filter(|s| s.get("error").is_some()).count(), 1);
        let text = v.to_string();
        for s in identity_strings(&arena) {
            assert!(!text.contains(&s), "{s:?} leaked in {text}");
        }
    });
}

#[test]
fn both_sides_down_fails_battle() {
    with_arena(|arena| async move {
        let app = router(arena.clone());
        let (status, v) = call(
            &app,
            "POST",
            "/api/arena/battles",
            Some(json!({"topic": "potty training", "left": "pipe-down", "right": "pipe-down2", "blinded": true})),
        )
        .await;
        assert_eq!(status, StatusCode::BAD_GATEWAY);
        assert_eq!(v["battle"]["state"], "failed");
        let text = v.to_string();
        for s in identity_strings(&arena) {
            assert!(!text.contains(&s), "{s:?} leaked in {text}");
        }
    });
}

#[test]
fn rag_pipelines_and_segments_endpoints() {
    with_arena(|arena| async move {
        let app = router(arena.clone());
        let (s, r) = call(&app, "POST", "/api/rag", Some(json!({"topic": "how often potty", "pipeline": "pipe-alpha"}))).await;
        assert_eq!(s, StatusCode::OK);
        let r: RagResponse = serde_json::from_value(r).unwrap();
        assert!(validate(&r).is_empty());
        assert!(!r.references.is_empty());
        let (_, p) = call(&app, "GET", "/api/pipelines", None).await;
        assert_eq!(p.as_array().unwrap().len(), 4);
        let (s, seg) = call(&app, "GET", "/api/segments/wall%231", None).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(seg["text"], TEXTS[1].2);
        assert_eq!(seg["url"], "https://example.org/wall#1");
        let (s, _) = call(&app, "GET", "/api/segments/none%230", None).await;
        assert_eq!(s, StatusCode::NOT_FOUND);
    });
}

#[test]
fn state_machine_guards() {
    let arena = arena_with(None);
    let b = arena.create_battle("potty", "pipe-alpha", "pipe-beta", true).unwrap();
    assert_eq!(b.state, BattleState::Created);
    assert!(matches!(arena.vote(&b.battle_id, Choice::Left, "v"), Err(ArenaError::InvalidState { .. })));
    arena.run_battle(&b.battle_id).unwrap();
    assert!(matches!(arena.run_battle(&b.battle_id), Err(ArenaError::InvalidState { .. })));
    arena.vote(&b.battle_id, Choice::Tie, "v").unwrap();
    let lb = arena.leaderboard();
    assert_eq!(lb.get("pipe-alpha").unwrap().rating, 1500.0);
    assert_eq!(lb.get("pipe-alpha").unwrap().ties, 1);
}

#[test]
fn racing_votes_accept_exactly_one() {
    let arena = Arc::new(arena_with(None));
    for _ in 0..20 {
        let b = arena.create_battle("the wall", "pipe-alpha", "pipe-beta", true).unwrap();
        arena.run_battle(&b.battle_id).unwrap();
        let handles: Vec<_> = (0..8)
            .map(|i| {
                let a = arena.clone();
                let id = b.battle_id.clone();
                std::thread::spawn(move || a.vote(&id, if i % 2 == 0 { Choice::Left } else { Choice::Right }, "v").is_ok())
            })
            .collect();
        let ok = handles.into_iter().map(|h| h.join().unwrap()).filter(|&x| x).count();
        assert_eq!(ok, 1);
    }
    let votes = arena.events().iter().filter(|e| matches!(e, ragkit_arena::Event::VoteCast { .. })).count();
    assert_eq!(votes, 20);
}

#[test]
fn restart_replays_event_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("events.jsonl");
    let (board, battle) = {
        let arena = arena_with(Some(log.clone()));
        for choice in [Choice::Left, Choice::Right, Choice::Left, Choice::BothBad] {
            let b = arena.create_battle("the wall", "pipe-alpha", "pipe-beta", true).unwrap();
            arena.run_battle(&b.battle_id).unwrap();
            arena.vote(&b.battle_id, choice, "v").unwrap();
        }
        let open = arena.create_battle("potty", "pipe-alpha", "pipe-beta", false).unwrap();
        ((*arena.leaderboard()).clone(), arena.battle(&open.battle_id).unwrap())
    };
    let arena = arena_with(Some(log));
    assert_eq!(*arena.leaderboard(), board);
    assert_eq!(arena.battle(&battle.battle_id).unwrap(), battle);
    // new battles continue the numbering
    let next = arena.create_battle("x", "pipe-alpha", "pipe-beta", true).unwrap();
    assert!(next.battle_id > battle.battle_id);
}
