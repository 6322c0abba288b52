use std::collections::BTreeMap;

use ragkit_core::ragio::RagResponse;
use serde::{Deserialize, Serialize};

use crate::elo::{update_ratings, Outcome, BASE_RATING};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BattleState {
    Created,
    Running,
    Answered,
    Voted,
    /// Both sides failed; terminal.
    Failed,
}

/// A vote in terms of the displayed sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    Left,
    Right,
    Tie,
    BothBad,
}

/// A vote resolved to the battle's pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    LeftWins,
    RightWins,
    Tie,
    BothBad,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SideResult {
    Answered { response: RagResponse },
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub choice: Choice,
    pub voter: String,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Battle {
    pub battle_id: String,
    pub topic: String,
    /// Pipeline ids as requested.
    pub left: String,
    pub right: String,
    pub blinded: bool,
    pub side_order_seed: u64,
    pub state: BattleState,
    /// Results for `[left, right]`.
    pub results: Option<[SideResult; 2]>,
    pub vote: Option<VoteRecord>,
}

const BLINDED_FAILURE: &str = "this system failed to answer";

impl Battle {
    /// Blinded battles show the requested right pipeline first when the
    /// seed is odd.
    pub fn swapped(&self) -> bool {
        self.blinded && self.side_order_seed & 1 == 1
    }

    /// Indices into `[left, right]` in display order.
    pub fn display_order(&self) -> [usize; 2] {
        if self.swapped() {
            [1, 0]
        } else {
            [0, 1]
        }
    }

    pub fn pipeline(&self, side: usize) -> &str {
        if side == 0 {
            &self.left
        } else {
            &self.right
        }
    }

    /// Neutral run id used for the response shown at display position `pos`.
    pub fn run_id_for(&self, pos: usize) -> String {
        format!("{}-{}", self.battle_id, ["a", "b"][pos])
    }

    pub fn resolve(&self, choice: Choice) -> Verdict {
        let [first, _] = self.display_order();
        match choice {
            Choice::Left if first == 0 => Verdict::LeftWins,
            Choice::Left => Verdict::RightWins,
            Choice::Right if first == 0 => Verdict::RightWins,
            Choice::Right => Verdict::LeftWins,
            Choice::Tie => Verdict::Tie,
            Choice::BothBad => Verdict::BothBad,
        }
    }

    fn revealed(&self) -> bool {
        !self.blinded || self.state == BattleState::Voted
    }

    /// The client-facing payload. Blinded battles carry no pipeline ids and
    /// no backend error text until voted.
    pub fn view(&self) -> BattleView {
        let revealed = self.revealed();
        let sides = self
            .display_order()
            .iter()
            .enumerate()
            .map(|(pos, &side)| {
                let (response, error) = match self.results.as_ref().map(|r| &r[side]) {
                    Some(SideResult::Answered { response }) => (Some(response.clone()), None),
                    Some(SideResult::Failed { error }) if revealed => (None, Some(error.clone())),
                    Some(SideResult::Failed { .. }) => (None, Some(BLINDED_FAILURE.to_string())),
                    None => (None, None),
                };
                SideView {
                    label: if self.blinded {
                        format!("System {}", ["A", "B"][pos])
                    } else {
                        self.pipeline(side).to_string()
                    },
                    pipeline: revealed.then(|| self.pipeline(side).to_string()),
                    response,
                    error,
                }
            })
            .collect();
        BattleView {
            battle_id: self.battle_id.clone(),
            topic: self.topic.clone(),
            blinded: self.blinded,
            state: self.state,
            sides,
            vote: self.vote.as_ref().map(|v| v.choice),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideView {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<RagResponse>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BattleView {
    pub battle_id: String,
    pub topic: String,
    pub blinded: bool,
    pub state: BattleState,
    /// In display order.
    pub sides: Vec<SideView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vote: Option<Choice>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub pipeline: String,
    pub wins: u64,
    pub losses: u64,
    pub ties: u64,
    pub both_bad: u64,
    pub rating: f64,
}

/// Win/loss/tie counts and Elo ratings per pipeline. Ties and both-bad
/// votes are counted but leave ratings unchanged; self-battles are not
/// counted at all.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Leaderboard {
    entries: BTreeMap<String, LeaderboardEntry>,
}

impl Leaderboard {
    pub fn new<'a>(pipelines: impl IntoIterator<Item = &'a str>) -> Self {
        let mut lb = Self::default();
        for p in pipelines {
            lb.entry(p);
        }
        lb
    }

    fn entry(&mut self, p: &str) -> &mut LeaderboardEntry {
        self.entries.entry(p.to_string()).or_insert_with(|| LeaderboardEntry {
            pipeline: p.to_string(),
            wins: 0,
            losses: 0,
            ties: 0,
            both_bad: 0,
            rating: BASE_RATING,
        })
    }

    pub fn apply(&mut self, left: &str, right: &str, verdict: Verdict) {
        if left == right {
            return;
        }
        let (a, b) = (self.entry(left).rating, self.entry(right).rating);
        let outcome = match verdict {
            Verdict::LeftWins => Outcome::AWins,
            Verdict::RightWins => Outcome::BWins,
            Verdict::Tie => {
                self.entry(left).ties += 1;
                self.entry(right).ties += 1;
                return;
            }
            Verdict::BothBad => {
                self.entry(left).both_bad += 1;
                self.entry(right).both_bad += 1;
                return;
            }
        };
        let (a2, b2) = update_ratings(a, b, outcome);
        let (winner, loser) = if outcome == Outcome::AWins { (left, right) } else { (right, left) };
        self.entry(winner).wins += 1;
        self.entry(loser).losses += 1;
        self.entry(left).rating = a2;
        self.entry(right).rating = b2;
    }

    pub fn get(&self, pipeline: &str) -> Option<&LeaderboardEntry> {
        self.entries.get(pipeline)
    }

    /// Entries by rating, highest first; ties by pipeline id.
    pub fn ranked(&self) -> Vec<LeaderboardEntry> {
        let mut v: Vec<LeaderboardEntry> = self.entries.values().cloned().collect();
        v.sort_by(|x, y| y.rating.total_cmp(&x.rating).then_with(|| x.pipeline.cmp(&y.pipeline)));
        v
    }

    pub fn total_rating(&self) -> f64 {
        self.entries.values().map(|e| e.rating).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn battle(blinded: bool, seed: u64) -> Battle {
        Battle {
            battle_id: "b1".into(),
            topic: "t".into(),
            left: "p-left".into(),
            right: "p-right".into(),
            blinded,
            side_order_seed: seed,
            state: BattleState::Answered,
            results: Some([
                SideResult::Failed { error: "p-left backend down".into() },
                SideResult::Answered { response: RagResponse::new("b1-b", "t", vec![], vec![]) },
            ]),
            vote: None,
        }
    }

    #[test]
    fn blinded_view_hides_identities() {
        let b = battle(true, 1);
        let json = serde_json::to_string(&b.view()).unwrap();
        assert!(!json.contains("p-left") && !json.contains("p-right"), "{json}");
        assert_eq!(b.view().sides[0].label, "System A");
        // seed is odd, so the right pipeline shows first
        assert!(b.view().sides[0].response.is_some());
    }

    #[test]
    fn unblinded_view_names_pipelines() {
        let v = battle(false, 1).view();
        assert_eq!(v.sides[0].pipeline.as_deref(), Some("p-left"));
        assert_eq!(v.sides[0].error.as_deref(), Some("p-left backend down"));
    }

    #[test]
    fn choice_resolution_follows_display() {
        assert_eq!(battle(true, 1).resolve(Choice::Left), Verdict::RightWins);
        assert_eq!(battle(true, 2).resolve(Choice::Left), Verdict::LeftWins);
        assert_eq!(battle(false, 1).resolve(Choice::Right), Verdict::RightWins);
    }

    #[test]
    fn leaderboard_counts() {
        let mut lb = Leaderboard::new(["a", "b"]);
        lb.apply("a", "b", Verdict::LeftWins);
        lb.apply("a", "b", Verdict::Tie);
        lb.apply("a", "b", Verdict::BothBad);
        lb.apply("a", "a", Verdict::LeftWins);
        let a = lb.get("a").unwrap();
        assert_eq!((a.wins, a.losses, a.ties, a.both_bad), (1, 0, 1, 1));
        assert_eq!(a.rating, 1516.0);
        assert_eq!(lb.ranked()[0].pipeline, "a");
    }
}
