//! Battle arena for comparing RAG pipelines side by side.
//!
//! Two pipelines answer the same topic; in blinded battles their identities
//! stay hidden until a vote is cast. Votes feed an Elo leaderboard and
//! every state change is appended to a JSONL event log that can be replayed.

pub mod battle;
pub mod config;
pub mod elo;
pub mod http;
pub mod service;

pub use battle::{Battle, BattleState, BattleView, Choice, Leaderboard, LeaderboardEntry, SideResult, SideView, Verdict, VoteRecord};
pub use config::{ArenaSettings, ConfigError, CorpusPaths, ServeConfig};
pub use elo::{update_ratings, Outcome, BASE_RATING, K_FACTOR};
pub use http::{router, serve};
pub use service::{read_events, replay_leaderboard, Arena, ArenaError, Event, PipelineInfo, SegmentPreview};
