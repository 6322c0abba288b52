use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ragkit_core::pipeline::{Corpus, Pipeline, PipelineConfig, PipelineError};
use ragkit_core::ragio::RagResponse;
use serde::{Deserialize, Serialize};

use crate::battle::{Battle, BattleState, BattleView, Choice, Leaderboard, SideResult, Verdict, VoteRecord};

#[derive(Debug, thiserror::Error)]
pub enum ArenaError {
    #[error("unknown pipeline {0:?}")]
    UnknownPipeline(String),
    #[error("unknown battle {0:?}")]
    UnknownBattle(String),
    #[error("unknown segment {0:?}")]
    UnknownSegment(String),
    #[error("topic is empty")]
    EmptyTopic,
    #[error("battle {battle_id} is {state:?}: {reason}")]
    InvalidState { battle_id: String, state: BattleState, reason: &'static str },
    #[error("already voted")]
    AlreadyVoted,
    #[error("both sides failed: left: {left}; right: {right}")]
    BothFailed { left: String, right: String },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("event log: {0}")]
    Log(String),
}

/// Persisted arena events, one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    BattleCreated {
        battle_id: String,
        topic: String,
        left: String,
        right: String,
        blinded: bool,
        side_order_seed: u64,
    },
    BattleAnswered {
        battle_id: String,
        state: BattleState,
        results: [SideResult; 2],
    },
    VoteCast {
        battle_id: String,
        left: String,
        right: String,
        verdict: Verdict,
        #[serde(flatten)]
        vote: VoteRecord,
    },
}

pub fn read_events(path: &Path) -> Result<Vec<Event>, ArenaError> {
    let f = File::open(path).map_err(|e| ArenaError::Log(e.to_string()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| ArenaError::Log(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ArenaError::Log(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

/// Rebuilds the leaderboard from votes in log order.
pub fn replay_leaderboard<'a>(pipelines: impl IntoIterator<Item = &'a str>, events: &[Event]) -> Leaderboard {
    let mut lb = Leaderboard::new(pipelines);
    for e in events {
        if let Event::VoteCast { left, right, verdict, .. } = e {
            lb.apply(left, right, *verdict);
        }
    }
    lb
}

struct EventSink {
    file: Option<File>,
    events: Vec<Event>,
}

impl EventSink {
    fn append(&mut self, e: Event) -> Result<(), ArenaError> {
        if let Some(f) = &mut self.file {
            let mut line = serde_json::to_string(&e).expect("event serializes");
            line.push('\n');
            f.write_all(line.as_bytes()).map_err(|e| ArenaError::Log(e.to_string()))?;
            f.flush().map_err(|e| ArenaError::Log(e.to_string()))?;
        }
        self.events.push(e);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentPreview {
    pub segment_id: String,
    pub title: String,
    pub text: String,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineInfo {
    pub id: String,
    pub reranker: String,
    pub generator: String,
    pub config: PipelineConfig,
}

pub struct Arena {
    pipelines: BTreeMap<String, Arc<Pipeline>>,
    corpus: Arc<Corpus>,
    seed: u64,
    battles: RwLock<HashMap<String, Arc<Mutex<Battle>>>>,
    next_battle: AtomicU64,
    /// Serialises log appends with leaderboard updates so replay order
    /// matches live order.
    sink: Mutex<EventSink>,
    board: RwLock<Arc<Leaderboard>>,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

impl Arena {
    /// Builds the arena. With `log` set, existing events there are replayed
    /// and new events appended.
    pub fn new(pipelines: Vec<Pipeline>, corpus: Arc<Corpus>, seed: u64, log: Option<PathBuf>) -> Result<Self, ArenaError> {
        let mut map = BTreeMap::new();
        for p in pipelines {
            let id = p.config.id.clone();
            if map.insert(id.clone(), Arc::new(p)).is_some() {
                return Err(ArenaError::Pipeline(PipelineError::Config(format!("duplicate pipeline id {id}"))));
            }
        }
        let events = match &log {
            Some(path) if path.exists() => read_events(path)?,
            _ => Vec::new(),
        };
        let file = match &log {
            Some(path) => Some(
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|e| ArenaError::Log(e.to_string()))?,
            ),
            None => None,
        };
        let board = replay_leaderboard(map.keys().map(String::as_str), &events);
        let mut battles: HashMap<String, Battle> = HashMap::new();
        let mut max_n = 0;
        for e in &events {
            match e.clone() {
                Event::BattleCreated { battle_id, topic, left, right, blinded, side_order_seed } => {
                    if let Some(n) = battle_id.strip_prefix('b').and_then(|n| n.parse::<u64>().ok()) {
                        max_n = max_n.max(n);
                    }
                    battles.insert(
                        battle_id.clone(),
                        Battle {
                            battle_id,
                            topic,
                            left,
                            right,
                            blinded,
                            side_order_seed,
                            state: BattleState::Created,
                            results: None,
                            vote: None,
                        },
                    );
                }
                Event::BattleAnswered { battle_id, state, results } => {
                    if let Some(b) = battles.get_mut(&battle_id) {
                        b.state = state;
                        b.results = Some(results);
                    }
                }
                Event::VoteCast { battle_id, vote, .. } => {
                    if let Some(b) = battles.get_mut(&battle_id) {
                        b.state = BattleState::Voted;
                        b.vote = Some(vote);
                    }
                }
            }
        }
        Ok(Self {
            pipelines: map,
            corpus,
            seed,
            battles: RwLock::new(battles.into_iter().map(|(k, v)| (k, Arc::new(Mutex::new(v)))).collect()),
            next_battle: AtomicU64::new(max_n + 1),
            sink: Mutex::new(EventSink { file, events }),
            board: RwLock::new(Arc::new(board)),
        })
    }

    pub fn pipelines(&self) -> Vec<PipelineInfo> {
        self.pipelines
            .values()
            .map(|p| PipelineInfo {
                id: p.config.id.clone(),
                reranker: p.reranker_name().to_string(),
                generator: p.generator_name().to_string(),
                config: p.config.clone(),
            })
            .collect()
    }

    fn pipeline(&self, id: &str) -> Result<&Arc<Pipeline>, ArenaError> {
        self.pipelines.get(id).ok_or_else(|| ArenaError::UnknownPipeline(id.to_string()))
    }

    fn battle_handle(&self, id: &str) -> Result<Arc<Mutex<Battle>>, ArenaError> {
        self.battles
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ArenaError::UnknownBattle(id.to_string()))
    }

    fn commit(&self, e: Event, verdict: Option<(&str, &str, Verdict)>) -> Result<(), ArenaError> {
        let mut sink = self.sink.lock().unwrap();
        sink.append(e)?;
        if let Some((l, r, v)) = verdict {
            let mut board = (**self.board.read().unwrap()).clone();
            board.apply(l, r, v);
            *self.board.write().unwrap() = Arc::new(board);
        }
        Ok(())
    }

    /// Events recorded so far, including any replayed at startup.
    pub fn events(&self) -> Vec<Event> {
        self.sink.lock().unwrap().events.clone()
    }

    /// Answers one topic with one pipeline; the first pipeline by id when
    /// none is named.
    pub fn rag(&self, topic_id: &str, topic: &str, pipeline: Option<&str>) -> Result<RagResponse, ArenaError> {
        if topic.trim().is_empty() {
            return Err(ArenaError::EmptyTopic);
        }
        let p = match pipeline {
            Some(id) => self.pipeline(id)?,
            None => self
                .pipelines
                .values()
                .next()
                .ok_or_else(|| ArenaError::UnknownPipeline(String::new()))?,
        };
        Ok(p.run_topic(&self.corpus, &p.config.id, topic_id, topic)?.response)
    }

    pub fn create_battle(&self, topic: &str, left: &str, right: &str, blinded: bool) -> Result<BattleView, ArenaError> {
        if topic.trim().is_empty() {
            return Err(ArenaError::EmptyTopic);
        }
        self.pipeline(left)?;
        self.pipeline(right)?;
        let n = self.next_battle.fetch_add(1, Ordering::SeqCst);
        let battle = Battle {
            battle_id: format!("b{n:06}"),
            topic: topic.trim().to_string(),
            left: left.to_string(),
            right: right.to_string(),
            blinded,
            side_order_seed: ChaCha8Rng::seed_from_u64(self.seed ^ n.rotate_left(32)).gen(),
            state: BattleState::Created,
            results: None,
            vote: None,
        };
        let view = battle.view();
        self.commit(
            Event::BattleCreated {
                battle_id: battle.battle_id.clone(),
                topic: battle.topic.clone(),
                left: battle.left.clone(),
                right: battle.right.clone(),
                blinded,
                side_order_seed: battle.side_order_seed,
            },
            None,
        )?;
        self.battles
            .write()
            .unwrap()
            .insert(battle.battle_id.clone(), Arc::new(Mutex::new(battle)));
        Ok(view)
    }

    /// Runs both pipelines. A failing side is recorded and the other side
    /// still answers; the battle fails only if both do.
    pub fn run_battle(&self, battle_id: &str) -> Result<BattleView, ArenaError> {
        let handle = self.battle_handle(battle_id)?;
        let snapshot = {
            let mut b = handle.lock().unwrap();
            if b.state != BattleState::Created {
                return Err(ArenaError::InvalidState {
                    battle_id: battle_id.to_string(),
                    state: b.state,
                    reason: "battle has already been run",
                });
            }
            b.state = BattleState::Running;
            b.clone()
        };
        let order = snapshot.display_order();
        let run_side = |side: usize| -> SideResult {
            let pos = order.iter().position(|&s| s == side).unwrap();
            let outcome = self.pipeline(snapshot.pipeline(side)).and_then(|p| {
                Ok(p.run_topic(&self.corpus, &snapshot.run_id_for(pos), battle_id, &snapshot.topic)?)
            });
            match outcome {
                Ok(o) => SideResult::Answered { response: o.response },
                Err(e) => SideResult::Failed { error: e.to_string() },
            }
        };
        let (l, r) = std::thread::scope(|s| {
            let l = s.spawn(|| run_side(0));
            let r = run_side(1);
            (l.join().expect("pipeline thread"), r)
        });
        let results = [l, r];
        let state = if results.iter().all(|r| matches!(r, SideResult::Failed { .. })) {
            BattleState::Failed
        } else {
            BattleState::Answered
        };
        let mut b = handle.lock().unwrap();
        self.commit(
            Event::BattleAnswered {
                battle_id: battle_id.to_string(),
                state,
                results: results.clone(),
            },
            None,
        )?;
        b.state = state;
        b.results = Some(results);
        if state == BattleState::Failed {
            let err = |r: &SideResult| match r {
                SideResult::Failed { error } => error.clone(),
                SideResult::Answered { .. } => String::new(),
            };
            let res = b.results.as_ref().unwrap();
            return Err(ArenaError::BothFailed { left: err(&res[0]), right: err(&res[1]) });
        }
        Ok(b.view())
    }

    pub fn battle(&self, battle_id: &str) -> Result<BattleView, ArenaError> {
        Ok(self.battle_handle(battle_id)?.lock().unwrap().view())
    }

    /// Records the vote and returns the revealed battle.
    pub fn vote(&self, battle_id: &str, choice: Choice, voter: &str) -> Result<BattleView, ArenaError> {
        let handle = self.battle_handle(battle_id)?;
        let mut b = handle.lock().unwrap();
        match b.state {
            BattleState::Answered => {}
            BattleState::Voted => return Err(ArenaError::AlreadyVoted),
            state => {
                return Err(ArenaError::InvalidState {
                    battle_id: battle_id.to_string(),
                    state,
                    reason: "votes are accepted only on answered battles",
                })
            }
        }
        let verdict = b.resolve(choice);
        let vote = VoteRecord {
            choice,
            voter: voter.to_string(),
            timestamp_ms: now_ms(),
        };
        self.commit(
            Event::VoteCast {
                battle_id: battle_id.to_string(),
                left: b.left.clone(),
                right: b.right.clone(),
                verdict,
                vote: vote.clone(),
            },
            Some((&b.left, &b.right, verdict)),
        )?;
        b.vote = Some(vote);
        b.state = BattleState::Voted;
        Ok(b.view())
    }

    /// Current leaderboard snapshot.
    pub fn leaderboard(&self) -> Arc<Leaderboard> {
        self.board.read().unwrap().clone()
    }

    pub fn segment(&self, segment_id: &str) -> Result<SegmentPreview, ArenaError> {
        let s = self
            .corpus
            .store
            .get(segment_id)
            .ok_or_else(|| ArenaError::UnknownSegment(segment_id.to_string()))?;
        Ok(SegmentPreview {
            segment_id: s.segment_id.clone(),
            title: s.title.clone(),
            text: s.text.clone(),
            url: s.url.clone(),
        })
    }
}
