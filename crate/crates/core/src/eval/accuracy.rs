use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_jsonl, write_jsonl};
use crate::matching::MatchResult;
use crate::model::Post;

/// One line of a ground-truth file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthPair {
    pub request_id: String,
    pub offer_id: String,
}

/// One-to-one mapping from request id to its true offer id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pairs: BTreeMap<String, String>,
}

impl GroundTruth {
    pub fn from_pairs(pairs: impl IntoIterator<Item = TruthPair>) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut offers = HashSet::new();
        for p in pairs {
            if !offers.insert(p.offer_id.clone()) {
                return Err(Error::InvalidTruth(format!("offer `{}` is the truth for two requests", p.offer_id)));
            }
            if map.insert(p.request_id.clone(), p.offer_id).is_some() {
                return Err(Error::InvalidTruth(format!("request `{}` listed twice", p.request_id)));
            }
        }
        Ok(Self { pairs: map })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_pairs(read_jsonl::<TruthPair>(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_jsonl(path, &self.to_pairs())
    }

    pub fn to_pairs(&self) -> Vec<TruthPair> {
        self.pairs
            .iter()
            .map(|(r, o)| TruthPair { request_id: r.clone(), offer_id: o.clone() })
            .collect()
    }

    pub fn get(&self, request_id: &str) -> Option<&str> {
        self.pairs.get(request_id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Every referenced id must exist in its corpus.
    pub fn check_against(&self, requests: &[Post], offers: &[Post]) -> Result<()> {
        let req: HashSet<&str> = requests.iter().map(|p| p.id.as_str()).collect();
        let off: HashSet<&str> = offers.iter().map(|p| p.id.as_str()).collect();
        for (r, o) in &self.pairs {
            if !req.contains(r.as_str()) {
                return Err(Error::InvalidTruth(format!("unknown request `{r}`")));
            }
            if !off.contains(o.as_str()) {
                return Err(Error::InvalidTruth(format!("unknown offer `{o}`")));
            }
        }
        Ok(())
    }
}

/// Fraction of result rows whose true offer is within the first `n` matches.
///
/// Requests with fewer than `n` (or zero) matches stay in the denominator.
pub fn topn_accuracy(results: &[MatchResult], truth: &GroundTruth, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParams("n must be at least 1".into()));
    }
    if results.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for r in results {
        let want = truth.get(&r.request_id).ok_or_else(|| Error::UnknownRequestId(r.request_id.clone()))?;
        if r.matches.iter().take(n).any(|m| m.offer_id == want) {
            hits += 1;
        }
    }
    Ok(hits as f64 / results.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::MatchEntry;
    use crate::scoring::ScoreBreakdown;
    use proptest::prelude::*;

    fn entry(id: &str, rank: usize) -> MatchEntry {
        let b = ScoreBreakdown {
            s_text: 0.5,
            w_time: None,
            w_location: None,
            s_overall: 1.0 / rank as f64,
            distance_km: None,
            delta_t_days: None,
        };
        MatchEntry { offer_id: id.into(), rank, breakdown: b }
    }

    fn result(req: &str, offers: &[&str]) -> MatchResult {
        MatchResult {
            request_id: req.into(),
            matches: offers.iter().enumerate().map(|(i, o)| entry(o, i + 1)).collect(),
        }
    }

    fn truth(n: usize) -> GroundTruth {
        GroundTruth::from_pairs((0..n).map(|i| TruthPair { request_id: format!("r{i}"), offer_id: format!("o{i}") })).unwrap()
    }

    #[test]
    fn definitions() {
        let t = truth(3);
        let all = vec![result("r0", &["o0"]), result("r1", &["o1", "o0"]), result("r2", &["o2"])];
        assert_eq!(topn_accuracy(&all, &t, 1).unwrap(), 1.0);
        let none = vec![result("r0", &[]), result("r1", &[]), result("r2", &[])];
        assert_eq!(topn_accuracy(&none, &t, 3).unwrap(), 0.0);
        let mixed = vec![result("r0", &["o1", "o0"]), result("r1", &[]), result("r2", &["o2"])];
        assert!((topn_accuracy(&mixed, &t, 1).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((topn_accuracy(&mixed, &t, 2).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(matches!(topn_accuracy(&[result("zz", &[])], &t, 1), Err(Error::UnknownRequestId(_))));
        assert!(topn_accuracy(&all, &t, 0).is_err());
    }

    #[test]
    fn truth_must_be_injective() {
        let dup_offer = vec![
            TruthPair { request_id: "a".into(), offer_id: "x".into() },
            TruthPair { request_id: "b".into(), offer_id: "x".into() },
        ];
        assert!(GroundTruth::from_pairs(dup_offer).is_err());
        let dup_req = vec![
            TruthPair { request_id: "a".into(), offer_id: "x".into() },
            TruthPair { request_id: "a".into(), offer_id: "y".into() },
        ];
        assert!(GroundTruth::from_pairs(dup_req).is_err());
    }

    proptest! {
        #[test]
        fn nondecreasing_in_n(ranks in proptest::collection::vec(proptest::option::of(0usize..6), 1..40)) {
            let t = truth(ranks.len());
            let results: Vec<MatchResult> = ranks
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let mut ids: Vec<String> = (0..6).map(|j| format!("x{i}_{j}")).collect();
                    if let Some(pos) = r {
                        ids[*pos] = format!("o{i}");
                    }
                    let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
                    result(&format!("r{i}"), &refs)
                })
                .collect();
            let mut last = 0.0;
            for n in 1..=7 {
                let a = topn_accuracy(&results, &t, n).unwrap();
                prop_assert!(a >= last);
                prop_assert!((0.0..=1.0).contains(&a));
                last = a;
            }
        }
    }
}
