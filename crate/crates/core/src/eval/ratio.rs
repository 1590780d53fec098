use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Post, PostKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    Country,
    Region,
    None,
}

impl FromStr for GroupBy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "country" => Ok(GroupBy::Country),
            "region" => Ok(GroupBy::Region),
            "none" => Ok(GroupBy::None),
            other => Err(Error::InvalidParams(format!("unknown group-by `{other}`"))),
        }
    }
}

impl fmt::Display for GroupBy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupBy::Country => "country",
            GroupBy::Region => "region",
            GroupBy::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub group: String,
    pub requests: usize,
    pub offers: usize,
    /// `offers / requests`; `None` when the group has no requests.
    pub or_ratio: Option<f64>,
}

/// Offer-to-request ratio per group, sorted by group name. Posts that are
/// neither requests nor offers are ignored.
pub fn offer_request_ratio(posts: &[Post], group_by: GroupBy) -> Result<Vec<RatioRow>> {
    let mut groups: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for p in posts {
        let is_request = match p.kind {
            PostKind::Request => true,
            PostKind::Offer => false,
            _ => continue,
        };
        let key = match group_by {
            GroupBy::None => "all".to_string(),
            GroupBy::Country => p.country.clone().ok_or_else(|| Error::MissingGroupKey(p.id.clone(), "country"))?,
            GroupBy::Region => p.region.clone().ok_or_else(|| Error::MissingGroupKey(p.id.clone(), "region"))?,
        };
        let e = groups.entry(key).or_default();
        if is_request {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    Ok(groups
        .into_iter()
        .map(|(group, (requests, offers))| RatioRow {
            group,
            requests,
            offers,
            or_ratio: (requests > 0).then(|| offers as f64 / requests as f64),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn posts(country: &str, requests: usize, offers: usize) -> Vec<Post> {
        let mut v = Vec::new();
        for i in 0..requests {
            let mut p = Post::new(format!("{country}-r{i}"), "x").with_kind(PostKind::Request);
            p.country = Some(country.into());
            v.push(p);
        }
        for i in 0..offers {
            let mut p = Post::new(format!("{country}-o{i}"), "x").with_kind(PostKind::Offer);
            p.country = Some(country.into());
            v.push(p);
        }
        v
    }

    #[test]
    fn ratios() {
        let mut all = posts("Australia", 100, 53);
        all.extend(posts("Nowhere", 0, 4));
        all.extend(posts("Quiet", 7, 0));
        all.push(Post::new("noise", "x"));
        let rows = offer_request_ratio(&all, GroupBy::Country).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].or_ratio, Some(0.53));
        assert_eq!(rows[1].or_ratio, None);
        assert_eq!(rows[2].or_ratio, Some(0.0));
        let json = serde_json::to_string(&rows[1]).unwrap();
        assert!(json.contains("\"or_ratio\":null"));

        let total = offer_request_ratio(&all, GroupBy::None).unwrap();
        assert_eq!(total, vec![RatioRow { group: "all".into(), requests: 107, offers: 57, or_ratio: Some(57.0 / 107.0) }]);
        assert!(matches!(offer_request_ratio(&all, GroupBy::Region), Err(Error::MissingGroupKey(_, "region"))));
    }
}
