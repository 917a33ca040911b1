//! Per-episode training log and the unique-molecule ledger.
//!
//! Both are tab-separated with one header line. Log rows are flushed as they
//! are written, so an interrupted run keeps every finished episode.

use std::collections::{BTreeMap, VecDeque};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

pub const LOG_HEADER: &str = "episode\tepsilon\thead\tsmiles\treward\treturn\tloss_avg";
pub const LEDGER_HEADER: &str = "smiles\tbest_reward\tfirst_episode";

/// Gradient steps averaged in the loss column.
const LOSS_WINDOW: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRow {
    pub episode: usize,
    pub epsilon: f64,
    pub head: Option<usize>,
    pub smiles: String,
    /// Undiscounted reward of the terminal molecule.
    pub reward: f64,
    pub discounted_return: f64,
    pub loss_avg: Option<f64>,
}

impl EpisodeRow {
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.episode,
            self.epsilon,
            self.head.map_or("na".to_string(), |h| h.to_string()),
            self.smiles,
            self.reward,
            self.discounted_return,
            self.loss_avg.map_or("na".to_string(), |l| l.to_string()),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerEntry {
    pub smiles: String,
    pub best_reward: f64,
    pub first_episode: usize,
}

/// Every distinct terminal molecule seen, keyed by canonical form.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ledger {
    entries: BTreeMap<String, LedgerEntry>,
    /// Keys in order of first appearance.
    order: Vec<String>,
}

impl Ledger {
    pub fn record(&mut self, smiles: &str, reward: f64, episode: usize) {
        match self.entries.get_mut(smiles) {
            Some(e) => {
                if reward > e.best_reward {
                    e.best_reward = reward;
                }
            }
            None => {
                self.entries.insert(
                    smiles.to_string(),
                    LedgerEntry {
                        smiles: smiles.to_string(),
                        best_reward: reward,
                        first_episode: episode,
                    },
                );
                self.order.push(smiles.to_string());
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, smiles: &str) -> Option<&LedgerEntry> {
        self.entries.get(smiles)
    }

    /// Entries by first appearance.
    pub fn entries(&self) -> impl Iterator<Item = &LedgerEntry> {
        self.order.iter().map(|k| &self.entries[k])
    }

    /// Best `k` by reward; ties go to the earlier discovery.
    pub fn top(&self, k: usize) -> Vec<&LedgerEntry> {
        let mut all: Vec<&LedgerEntry> = self.entries().collect();
        all.sort_by(|a, b| b.best_reward.total_cmp(&a.best_reward).then(a.first_episode.cmp(&b.first_episode)));
        all.truncate(k);
        all
    }

    /// The `n` most recently discovered molecules, oldest first.
    pub fn last_unique(&self, n: usize) -> Vec<&LedgerEntry> {
        let skip = self.order.len().saturating_sub(n);
        self.order[skip..].iter().map(|k| &self.entries[k]).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(LEDGER_HEADER);
        out.push('\n');
        for e in self.entries() {
            out.push_str(&format!("{}\t{}\t{}\n", e.smiles, e.best_reward, e.first_episode));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Ledger, String> {
        let mut lines = text.lines();
        if lines.next() != Some(LEDGER_HEADER) {
            return Err("missing ledger header".into());
        }
        let mut ledger = Ledger::default();
        for (i, line) in lines.enumerate() {
            let f: Vec<&str> = line.split('\t').collect();
            let bad = || format!("ledger row {}: {line:?}", i + 2);
            if f.len() != 3 {
                return Err(bad());
            }
            let reward: f64 = f[1].parse().map_err(|_| bad())?;
            let episode: usize = f[2].parse().map_err(|_| bad())?;
            if ledger.get(f[0]).is_some() {
                return Err(format!("{} (duplicate molecule)", bad()));
            }
            ledger.record(f[0], reward, episode);
        }
        Ok(ledger)
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.to_text())
    }
}

/// Streaming log writer plus the ledger it feeds.
#[derive(Debug)]
pub struct RunLog {
    out: Option<BufWriter<File>>,
    last_episode: Option<usize>,
    losses: VecDeque<f64>,
    pub ledger: Ledger,
}

impl RunLog {
    /// Writes to `path` when given; otherwise only the ledger is kept.
    pub fn create(path: Option<&Path>) -> io::Result<Self> {
        let out = match path {
            None => None,
            Some(p) => {
                let mut w = BufWriter::new(File::create(p)?);
                writeln!(w, "{LOG_HEADER}")?;
                w.flush()?;
                Some(w)
            }
        };
        Ok(RunLog {
            out,
            last_episode: None,
            losses: VecDeque::new(),
            ledger: Ledger::default(),
        })
    }

    pub fn push_losses(&mut self, losses: &[f64]) {
        for &l in losses {
            if self.losses.len() == LOSS_WINDOW {
                self.losses.pop_front();
            }
            self.losses.push_back(l);
        }
    }

    pub fn loss_avg(&self) -> Option<f64> {
        if self.losses.is_empty() {
            None
        } else {
            Some(self.losses.iter().sum::<f64>() / self.losses.len() as f64)
        }
    }

    pub fn append(&mut self, row: &EpisodeRow) -> io::Result<()> {
        if self.last_episode.is_some_and(|last| row.episode <= last) {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "episode indices must increase"));
        }
        self.last_episode = Some(row.episode);
        self.ledger.record(&row.smiles, row.reward, row.episode);
        if let Some(w) = &mut self.out {
            writeln!(w, "{}", row.to_line())?;
            w.flush()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ledger_keeps_best_and_first_seen() {
        let mut l = Ledger::default();
        l.record("CC", 1.0, 0);
        l.record("CO", 3.0, 1);
        l.record("CC", 2.0, 5);
        l.record("CCC", 3.0, 7);
        assert_eq!(l.len(), 3);
        assert_eq!(l.get("CC").unwrap().best_reward, 2.0);
        assert_eq!(l.get("CC").unwrap().first_episode, 0);
        let top: Vec<&str> = l.top(2).iter().map(|e| e.smiles.as_str()).collect();
        assert_eq!(top, ["CO", "CCC"]);
        let last: Vec<&str> = l.last_unique(2).iter().map(|e| e.smiles.as_str()).collect();
        assert_eq!(last, ["CO", "CCC"]);
        assert_eq!(Ledger::parse(&l.to_text()).unwrap(), l);
    }

    #[test]
    fn log_rejects_out_of_order_episodes() {
        let mut log = RunLog::create(None).unwrap();
        let row = |episode| EpisodeRow {
            episode,
            epsilon: 1.0,
            head: Some(0),
            smiles: "C".into(),
            reward: 0.0,
            discounted_return: 0.0,
            loss_avg: None,
        };
        log.append(&row(0)).unwrap();
        log.append(&row(2)).unwrap();
        assert!(log.append(&row(2)).is_err());
    }
}
