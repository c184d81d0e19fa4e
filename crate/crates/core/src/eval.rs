//! Evaluation protocol: three-annotator votes, majority verdicts, per-room
//! success tables with macro averages, and failure-type shares.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grounding::{GroundingVerdict, ValidationReport};
use crate::plan::Plan;
use crate::scene::{ObjectList, RoomType};

pub const VOTES_PER_ITEM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Success,
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureType {
    Counterfactual,
    Hallucination,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub item_id: String,
    pub annotator_id: String,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_type: Option<FailureType>,
    /// Seconds since the Unix epoch.
    #[serde(default)]
    pub timestamp: u64,
}

impl VoteRecord {
    pub fn success(item_id: &str, annotator_id: &str) -> Self {
        VoteRecord {
            item_id: item_id.into(),
            annotator_id: annotator_id.into(),
            verdict: Verdict::Success,
            failure_type: None,
            timestamp: 0,
        }
    }

    pub fn failure(item_id: &str, annotator_id: &str, kind: FailureType) -> Self {
        VoteRecord {
            verdict: Verdict::Failure,
            failure_type: Some(kind),
            ..Self::success(item_id, annotator_id)
        }
    }

    /// A failure type is required for failures and forbidden for successes.
    pub fn validate(&self) -> Result<()> {
        if self.item_id.is_empty() || self.annotator_id.is_empty() {
            return Err(Error::InvalidVote("item and annotator ids must be non-empty".into()));
        }
        match (self.verdict, self.failure_type) {
            (Verdict::Failure, None) => Err(Error::InvalidVote("failure vote without failure_type".into())),
            (Verdict::Success, Some(_)) => Err(Error::InvalidVote("success vote with failure_type".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Outcome {
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_type: Option<FailureType>,
}

impl Outcome {
    pub const SUCCESS: Outcome = Outcome {
        verdict: Verdict::Success,
        failure_type: None,
    };

    pub fn failure(kind: FailureType) -> Self {
        Outcome {
            verdict: Verdict::Failure,
            failure_type: Some(kind),
        }
    }
}

impl From<GroundingVerdict> for Outcome {
    fn from(v: GroundingVerdict) -> Self {
        match v {
            GroundingVerdict::Success => Outcome::SUCCESS,
            GroundingVerdict::Hallucination => Outcome::failure(FailureType::Hallucination),
            GroundingVerdict::Counterfactual => Outcome::failure(FailureType::Counterfactual),
        }
    }
}

/// Success iff at least two of the three votes are successes. Otherwise the
/// failure type is the majority among failure votes, with a one-one split
/// resolving to counterfactual.
pub fn majority_verdict(votes: &[VoteRecord]) -> Result<Outcome> {
    if votes.len() != VOTES_PER_ITEM {
        return Err(Error::VoteCount(votes.len()));
    }
    for v in votes {
        v.validate()?;
    }
    let successes = votes.iter().filter(|v| v.verdict == Verdict::Success).count();
    if successes >= 2 {
        return Ok(Outcome::SUCCESS);
    }
    let hallucinations = votes
        .iter()
        .filter(|v| v.failure_type == Some(FailureType::Hallucination))
        .count();
    let counterfactuals = VOTES_PER_ITEM - successes - hallucinations;
    Ok(Outcome::failure(if hallucinations > counterfactuals {
        FailureType::Hallucination
    } else {
        FailureType::Counterfactual
    }))
}

/// A plan shown to annotators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalItem {
    pub item_id: String,
    pub scene_id: String,
    pub room_type: RoomType,
    pub instruction: String,
    pub plan: Plan,
    pub object_list: ObjectList,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auto_report: Option<ValidationReport>,
}

/// Percentage in hundredths, rounded half up.
fn round_centi(percent: Ratio<u128>) -> u64 {
    (percent * Ratio::from_integer(100) + Ratio::new(1, 2)).floor().to_integer() as u64
}

/// Formats hundredths of a percent as `12.34`.
pub fn format_centi(centi: u64) -> String {
    format!("{}.{:02}", centi / 100, centi % 100)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RoomTally {
    pub successes: u64,
    pub total: u64,
}

impl RoomTally {
    /// Exact success rate in percent; `None` when the room has no items.
    pub fn exact_rate(&self) -> Option<Ratio<u128>> {
        (self.total > 0).then(|| Ratio::new(100 * self.successes as u128, self.total as u128))
    }

    pub fn rate_centi(&self) -> Option<u64> {
        self.exact_rate().map(round_centi)
    }
}

/// Per-room success counts. Rooms without items are absent and excluded
/// from the macro average.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SuccessTable {
    pub rooms: BTreeMap<RoomType, RoomTally>,
}

impl SuccessTable {
    pub fn from_counts(counts: &[(RoomType, u64, u64)]) -> Self {
        SuccessTable {
            rooms: counts
                .iter()
                .filter(|(_, _, t)| *t > 0)
                .map(|&(r, s, t)| (r, RoomTally { successes: s, total: t }))
                .collect(),
        }
    }

    pub fn tally(&self, room: RoomType) -> Option<RoomTally> {
        self.rooms.get(&room).copied()
    }

    pub fn rate_centi(&self, room: RoomType) -> Option<u64> {
        self.rooms.get(&room).and_then(RoomTally::rate_centi)
    }

    pub fn rate(&self, room: RoomType) -> Option<f64> {
        self.rate_centi(room).map(|c| c as f64 / 100.0)
    }

    pub fn absent_rooms(&self) -> Vec<RoomType> {
        RoomType::ALL
            .into_iter()
            .filter(|r| !self.rooms.contains_key(r))
            .collect()
    }

    /// Unweighted mean of the exact per-room rates, rounded half up.
    pub fn macro_average_centi(&self) -> Option<u64> {
        let rates: Vec<Ratio<u128>> = self.rooms.values().filter_map(RoomTally::exact_rate).collect();
        if rates.is_empty() {
            return None;
        }
        let n = rates.len() as u128;
        let sum = rates.into_iter().fold(Ratio::from_integer(0), |a, r| a + r);
        Some(round_centi(sum / Ratio::from_integer(n)))
    }

    pub fn macro_average(&self) -> Option<f64> {
        self.macro_average_centi().map(|c| c as f64 / 100.0)
    }

    /// Mean of the displayed (already rounded) room rates, rounded half up.
    pub fn macro_average_of_displayed_centi(&self) -> Option<u64> {
        let shown: Vec<u64> = self.rooms.values().filter_map(RoomTally::rate_centi).collect();
        if shown.is_empty() {
            return None;
        }
        let sum: u128 = shown.iter().map(|&c| c as u128).sum();
        Some(round_centi(Ratio::new(sum, shown.len() as u128 * 100)))
    }

    pub fn overall(&self) -> RoomTally {
        self.rooms.values().fold(RoomTally::default(), |a, t| RoomTally {
            successes: a.successes + t.successes,
            total: a.total + t.total,
        })
    }

    /// One table row: `label | Kit. | Living. | Bed. | Bath. | Avg.`, with
    /// `-` for absent rooms.
    pub fn render_row(&self, label: &str) -> String {
        let mut cells = vec![label.to_string()];
        for room in RoomType::ALL {
            cells.push(self.rate_centi(room).map(format_centi).unwrap_or_else(|| "-".into()));
        }
        cells.push(self.macro_average_centi().map(format_centi).unwrap_or_else(|| "-".into()));
        cells.join(" | ")
    }
}

#[derive(Serialize, Deserialize)]
struct RoomCell {
    successes: u64,
    total: u64,
    rate: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    rooms: BTreeMap<RoomType, RoomCell>,
    average: Option<f64>,
    absent: Vec<RoomType>,
}

impl Serialize for SuccessTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TableRepr {
            rooms: self
                .rooms
                .iter()
                .map(|(r, t)| {
                    (
                        *r,
                        RoomCell {
                            successes: t.successes,
                            total: t.total,
                            rate: t.rate_centi().map(|c| c as f64 / 100.0),
                        },
                    )
                })
                .collect(),
            average: self.macro_average(),
            absent: self.absent_rooms(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SuccessTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = TableRepr::deserialize(d)?;
        Ok(SuccessTable {
            rooms: repr
                .rooms
                .into_iter()
                .map(|(r, c)| (r, RoomTally { successes: c.successes, total: c.total }))
                .collect(),
        })
    }
}

pub const TABLE_HEADER: &str = "Method | Kit. | Living. | Bed. | Bath. | Avg.";

/// Text export of several rows, one per method or strategy.
pub fn render_table(rows: &[(String, SuccessTable)]) -> String {
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for (label, table) in rows {
        out.push_str(&table.render_row(label));
        out.push('\n');
    }
    out.push_str("\nFailure votes split one-one across types count as counterfactual.\n");
    out
}

/// Per-room rates and macro average over items with known outcomes.
pub fn aggregate_success<'a>(items: impl IntoIterator<Item = (RoomType, &'a Outcome)>) -> SuccessTable {
    let mut table = SuccessTable::default();
    for (room, outcome) in items {
        let t = table.rooms.entry(room).or_default();
        t.total += 1;
        if outcome.verdict == Verdict::Success {
            t.successes += 1;
        }
    }
    for room in table.absent_rooms() {
        log::warn!("no evaluated items for {room}; excluded from the average");
    }
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FailureCounts {
    pub success: u64,
    pub counterfactual: u64,
    pub hallucination: u64,
}

impl FailureCounts {
    pub fn total(&self) -> u64 {
        self.success + self.counterfactual + self.hallucination
    }
}

/// Shares of outcomes in percent, rounded half up to two decimals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureBreakdown {
    pub counts: FailureCounts,
    pub success: f64,
    pub counterfactual: f64,
    pub hallucination: f64,
}

pub fn failure_breakdown<'a>(outcomes: impl IntoIterator<Item = &'a Outcome>) -> Result<FailureBreakdown> {
    let mut counts = FailureCounts::default();
    for o in outcomes {
        match (o.verdict, o.failure_type) {
            (Verdict::Success, _) => counts.success += 1,
            (Verdict::Failure, Some(FailureType::Hallucination)) => counts.hallucination += 1,
            (Verdict::Failure, _) => counts.counterfactual += 1,
        }
    }
    let n = counts.total();
    if n == 0 {
        return Err(Error::Empty("failure breakdown over zero items".into()));
    }
    let share = |c: u64| round_centi(Ratio::new(100 * c as u128, n as u128)) as f64 / 100.0;
    Ok(FailureBreakdown {
        counts,
        success: share(counts.success),
        counterfactual: share(counts.counterfactual),
        hallucination: share(counts.hallucination),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub complete: usize,
    pub total: usize,
}

impl Progress {
    pub fn is_complete(&self) -> bool {
        self.complete == self.total
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteAck {
    pub item_id: String,
    pub annotator_id: String,
    pub votes_on_item: usize,
}

#[derive(Debug)]
struct StoreState {
    file: File,
    votes: Vec<VoteRecord>,
    by_item: BTreeMap<String, Vec<usize>>,
}

/// Append-only vote log backed by a newline-delimited file. Appends are
/// serialized and synced before they are acknowledged.
#[derive(Debug)]
pub struct VoteStore {
    path: PathBuf,
    items: BTreeMap<String, EvalItem>,
    state: Mutex<StoreState>,
}

fn check_vote(vote: &VoteRecord, items: &BTreeMap<String, EvalItem>, votes: &[VoteRecord], existing: &[usize]) -> Result<()> {
    vote.validate()?;
    if !items.contains_key(&vote.item_id) {
        return Err(Error::UnknownItem(vote.item_id.clone()));
    }
    if existing.iter().any(|&i| votes[i].annotator_id == vote.annotator_id) {
        return Err(Error::DuplicateVote {
            item: vote.item_id.clone(),
            annotator: vote.annotator_id.clone(),
        });
    }
    if existing.len() >= VOTES_PER_ITEM {
        return Err(Error::ItemComplete(vote.item_id.clone()));
    }
    Ok(())
}

impl VoteStore {
    /// Opens (creating if needed) the log at `path` and replays it. Any
    /// unreadable or inconsistent line is reported as corruption.
    pub fn open(path: impl AsRef<Path>, items: Vec<EvalItem>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut by_id = BTreeMap::new();
        for item in items {
            let id = item.item_id.clone();
            if by_id.insert(id.clone(), item).is_some() {
                return Err(Error::validation("item_id", format!("duplicate item {id}")));
            }
        }
        let mut votes = Vec::new();
        let mut by_item: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path).map_err(|e| Error::io(&path, e))?);
            for (n, line) in reader.lines().enumerate() {
                let line = line.map_err(|e| Error::io(&path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let corrupt = |message: String| Error::CorruptLog { line: n + 1, message };
                let vote: VoteRecord = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
                let existing = by_item.get(&vote.item_id).map(Vec::as_slice).unwrap_or(&[]);
                check_vote(&vote, &by_id, &votes, existing).map_err(|e| corrupt(e.to_string()))?;
                by_item.entry(vote.item_id.clone()).or_default().push(votes.len());
                votes.push(vote);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(VoteStore {
            path,
            items: by_id,
            state: Mutex::new(StoreState { file, votes, by_item }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn items(&self) -> impl Iterator<Item = &EvalItem> {
        self.items.values()
    }

    pub fn item(&self, id: &str) -> Option<&EvalItem> {
        self.items.get(id)
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, StoreState> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn record_vote(&self, vote: VoteRecord) -> Result<VoteAck> {
        let mut st = self.lock();
        let existing = st.by_item.get(&vote.item_id).map(Vec::as_slice).unwrap_or(&[]);
        check_vote(&vote, &self.items, &st.votes, existing)?;
        let mut line = serde_json::to_string(&vote).map_err(|e| Error::parse("vote", e))?;
        line.push('\n');
        st.file
            .write_all(line.as_bytes())
            .and_then(|_| st.file.sync_data())
            .map_err(|e| Error::io(&self.path, e))?;
        let idx = st.votes.len();
        st.votes.push(vote.clone());
        let entry = st.by_item.entry(vote.item_id.clone()).or_default();
        entry.push(idx);
        Ok(VoteAck {
            votes_on_item: entry.len(),
            item_id: vote.item_id,
            annotator_id: vote.annotator_id,
        })
    }

    /// Consistent copy of every recorded vote in log order.
    pub fn snapshot(&self) -> Vec<VoteRecord> {
        self.lock().votes.clone()
    }

    /// Items still needing votes that `annotator` has not voted on.
    pub fn queue(&self, annotator: &str) -> Vec<&EvalItem> {
        let st = self.lock();
        self.items
            .values()
            .filter(|item| {
                let idx = st.by_item.get(&item.item_id).map(Vec::as_slice).unwrap_or(&[]);
                idx.len() < VOTES_PER_ITEM && !idx.iter().any(|&i| st.votes[i].annotator_id == annotator)
            })
            .collect()
    }

    pub fn flush(&self) -> Result<()> {
        self.lock().file.sync_all().map_err(|e| Error::io(&self.path, e))
    }

    /// Outcome per item, `None` until the item has three votes.
    pub fn outcomes(&self) -> BTreeMap<String, Option<Outcome>> {
        outcomes_from_votes(&self.items, &self.snapshot())
    }

    pub fn progress(&self) -> Progress {
        let outcomes = self.outcomes();
        Progress {
            complete: outcomes.values().filter(|o| o.is_some()).count(),
            total: outcomes.len(),
        }
    }

    /// Success table over the log. Totals count every item so that rooms
    /// still awaiting votes show their full denominators.
    pub fn success_table(&self) -> SuccessTable {
        voted_success_table(&self.items, &self.snapshot())
    }

    pub fn failure_breakdown(&self) -> Result<FailureBreakdown> {
        let decided: Vec<Outcome> = self.outcomes().into_values().flatten().collect();
        failure_breakdown(&decided)
    }
}

pub fn outcomes_from_votes(items: &BTreeMap<String, EvalItem>, votes: &[VoteRecord]) -> BTreeMap<String, Option<Outcome>> {
    let mut grouped: BTreeMap<&str, Vec<VoteRecord>> = BTreeMap::new();
    for v in votes {
        grouped.entry(v.item_id.as_str()).or_default().push(v.clone());
    }
    items
        .keys()
        .map(|id| {
            let outcome = grouped.get(id.as_str()).and_then(|v| majority_verdict(v).ok());
            (id.clone(), outcome)
        })
        .collect()
}

pub fn voted_success_table(items: &BTreeMap<String, EvalItem>, votes: &[VoteRecord]) -> SuccessTable {
    let outcomes = outcomes_from_votes(items, votes);
    let mut table = SuccessTable::default();
    for (id, item) in items {
        let t = table.rooms.entry(item.room_type).or_default();
        t.total += 1;
        if matches!(outcomes[id], Some(o) if o.verdict == Verdict::Success) {
            t.successes += 1;
        }
    }
    table
}

/// Suggested outcome from the automated validator; never counted as a vote.
pub fn auto_outcome(item: &EvalItem) -> Option<Outcome> {
    item.auto_report.as_ref().map(|r| r.verdict.into())
}

impl fmt::Display for SuccessTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{TABLE_HEADER}")?;
        write!(f, "{}", self.render_row("-"))
    }
}
