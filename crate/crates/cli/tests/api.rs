use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use strong_ramsey::game::{GameOutcome, Player, Position};
use strong_ramsey_cli::api::{router, Created, MoveReply, StateView};
use tower::ServiceExt;

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or_else(Body::empty, |b| Body::from(b.to_string()))).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

fn rebuild(s: &StateView) -> Position {
    let edges: Vec<_> = s.edges.iter().map(|e| (e.u, e.v, e.color)).collect();
    Position::from_edges(3, s.turn, &edges, false).unwrap()
}

/// Blocks P1's threats; otherwise claims the free pair (or a fresh edge from
/// the vertex) where P1 is busiest. Every third quiet move uses a fresh vertex.
fn defend(s: &StateView, threats: &[(usize, usize)], i: usize) -> Value {
    if let Some(&(u, v)) = threats.first() {
        return json!({"u": u, "v": v});
    }
    let p = rebuild(s);
    let d = |v: usize| p.degree(Player::P1, v).unwrap();
    if i.is_multiple_of(3) {
        let v = (0..p.vertex_count()).max_by_key(|&v| (d(v), std::cmp::Reverse(v))).unwrap();
        return json!({"u": v, "v": "fresh"});
    }
    match p.uncolored_pairs().into_iter().max_by_key(|e| (d(e.u) + d(e.v), std::cmp::Reverse(*e))) {
        Some(e) => json!({"u": e.u, "v": e.v}),
        None => json!({"u": "fresh", "v": "new"}),
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn scripted_game_ends_in_first_player_win() {
    let app = router();
    let (status, body) = call(&app, Method::POST, "/api/games", Some(json!({"t": 3}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let created: Created = serde_json::from_value(body).unwrap();
    assert_eq!(created.state.edges.len(), 1);
    assert_eq!(created.state.turn, Player::P2);
    let uri = format!("/api/games/{}/moves", created.game_id);

    let mut state = created.state;
    let mut threats: Vec<(usize, usize)> = Vec::new();
    let (mut moves, mut fresh) = (0, 0);
    while state.outcome == GameOutcome::Ongoing {
        let mv = defend(&state, &threats, moves);
        fresh += usize::from(mv["v"] == "fresh" || mv["u"] == "fresh");
        let (status, body) = call(&app, Method::POST, &uri, Some(mv.clone())).await;
        assert_eq!(status, StatusCode::OK, "{mv} -> {body}");
        let reply: MoveReply = serde_json::from_value(body).unwrap();
        assert!(reply.accepted);
        assert_eq!(reply.state.edges.len(), state.edges.len() + 2, "engine replied");
        assert!(reply.engine_move.is_some());
        assert_eq!(reply.outcome, reply.state.outcome);
        threats = reply.threats.p1.iter().map(|e| (e.u, e.v)).collect();
        state = reply.state;
        moves += 1;
    }
    assert!(moves >= 10, "only {moves} P2 moves");
    assert!(fresh > 0 && fresh < moves);
    assert_eq!(state.outcome, GameOutcome::P1Win);
    let p = rebuild(&state);
    assert!(p.wins(Player::P1) && !p.wins(Player::P2));

    let (status, _) = call(&app, Method::POST, &uri, Some(json!({"u": 0, "v": "fresh"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test(flavor = "multi_thread")]
async fn illegal_move_leaves_state_unchanged() {
    let app = router();
    let (_, body) = call(&app, Method::POST, "/api/games", Some(json!({"t": 3}))).await;
    let created: Created = serde_json::from_value(body).unwrap();
    let game = format!("/api/games/{}", created.game_id);
    let moves = format!("{game}/moves");

    // P1 opened with edge 0-1
    for bad in
        [json!({"u": 0, "v": 1}), json!({"u": 0, "v": 0}), json!({"u": 7, "v": "fresh"}), json!({"u": 0, "v": "x"})]
    {
        let (status, body) = call(&app, Method::POST, &moves, Some(bad.clone())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{bad}");
        assert!(body["error"].is_string());
    }
    let (status, body) = call(&app, Method::GET, &game, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(serde_json::from_value::<StateView>(body).unwrap(), created.state);
}

#[tokio::test]
async fn unknown_games_and_targets() {
    let app = router();
    assert_eq!(call(&app, Method::POST, "/api/games", Some(json!({"t": 2}))).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, Method::GET, "/api/games/99", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, Method::DELETE, "/api/games/abc", None).await.0, StatusCode::NOT_FOUND);
    let (_, body) = call(&app, Method::POST, "/api/games", Some(json!({"t": 3}))).await;
    let id = body["gameId"].as_str().unwrap().to_string();
    assert_eq!(body["state"]["phase"], "OPENING");
    assert_eq!(call(&app, Method::DELETE, &format!("/api/games/{id}"), None).await.0, StatusCode::NO_CONTENT);
    assert_eq!(call(&app, Method::GET, &format!("/api/games/{id}"), None).await.0, StatusCode::NOT_FOUND);
    let (status, _) =
        call(&app, Method::POST, &format!("/api/games/{id}/moves"), Some(json!({"u": 0, "v": "fresh"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}
