//! Regex pre-filter for potential requests/offers and the classifier cascade.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Post, PostKind, Resource};

/// The five built-in patterns, in rank order.
pub const BUILTIN_PATTERNS: [&str; 5] = [
    r"\b(donate|donor|donors|help|fundraising|fundraiser|relief|fund|aiding|volunteer|volunteers|response team|response teams|victim|victims)\b",
    r"\b(donate|donating|donation|donations)\b",
    r"\b(cloth|clothes|clothing|jersey|sweater|sweaters|vest|vests|jeans|jacket|jackets|blazer|blazers|glove|gloves|blanket|blankets|mask|masks|ppe|sanitizers|supplies)\b",
    r"\b(need|needing|inform|informing|looking|sharing|share|offer|offering|providing|seeking|searching)\b.*\b(supplies|shelter|testing|vaccination|emergency services|help|support|aid|assistance|information|update|updates)\b",
    r"\b\w*\s*\b\?",
];

/// Rewrites every `\b` to an ASCII word boundary, leaving other escapes alone.
fn ascii_word_boundaries(pattern: &str) -> String {
    let mut out = String::with_capacity(pattern.len() + 16);
    let mut chars = pattern.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('b') => out.push_str(r"(?-u:\b)"),
                Some(n) => {
                    out.push('\\');
                    out.push(n);
                }
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

#[derive(Debug, Clone)]
struct Pattern {
    id: u32,
    source: String,
}

/// Ordered, case-insensitive pattern list with stable ids.
#[derive(Debug, Clone)]
pub struct RegexSet {
    patterns: Vec<Pattern>,
    compiled: regex::RegexSet,
    // per-pattern handles, for callers that want spans
    singles: Vec<Regex>,
}

impl RegexSet {
    pub fn new<S: Into<String>>(entries: impl IntoIterator<Item = (u32, S)>) -> Result<Self> {
        let mut patterns: Vec<Pattern> = Vec::new();
        let mut singles = Vec::new();
        for (id, src) in entries {
            let source = src.into();
            if patterns.iter().any(|p| p.id == id) {
                return Err(Error::DuplicatePatternId(id));
            }
            let re = RegexBuilder::new(&ascii_word_boundaries(&source))
                .case_insensitive(true)
                .build()
                .map_err(|e| Error::Pattern { id, source: e })?;
            singles.push(re);
            patterns.push(Pattern { id, source });
        }
        let compiled = regex::RegexSetBuilder::new(patterns.iter().map(|p| ascii_word_boundaries(&p.source)))
            .case_insensitive(true)
            .build()
            .map_err(|e| Error::Pattern { id: 0, source: e })?;
        Ok(Self { patterns, compiled, singles })
    }

    /// The built-in patterns with ids 1 to 5.
    pub fn builtin() -> Self {
        Self::new(BUILTIN_PATTERNS.iter().enumerate().map(|(i, p)| (i as u32 + 1, *p)))
            .expect("built-in patterns compile")
    }

    /// Parses a pattern file: one regex per line, `#` starts a comment line.
    /// Ids continue from `first_id` in file order.
    pub fn parse_pattern_file(text: &str, first_id: u32) -> Vec<(u32, String)> {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .enumerate()
            .map(|(i, l)| (first_id + i as u32, l.to_string()))
            .collect()
    }

    /// The built-in set extended with the patterns in `path`, numbered from 6.
    pub fn builtin_with_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut entries: Vec<(u32, String)> = BUILTIN_PATTERNS
            .iter()
            .enumerate()
            .map(|(i, p)| (i as u32 + 1, p.to_string()))
            .collect();
        let next = entries.len() as u32 + 1;
        entries.extend(Self::parse_pattern_file(&text, next));
        Self::new(entries)
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.patterns.iter().map(|p| p.id)
    }

    pub fn pattern(&self, id: u32) -> Option<&str> {
        self.patterns.iter().find(|p| p.id == id).map(|p| p.source.as_str())
    }

    /// Ids of every pattern matching `text`, ascending.
    pub fn matching_ids(&self, text: &str) -> Vec<u32> {
        let mut ids: Vec<u32> = self.compiled.matches(text).into_iter().map(|i| self.patterns[i].id).collect();
        ids.sort_unstable();
        ids
    }

    pub fn is_match(&self, text: &str) -> bool {
        self.compiled.is_match(text)
    }

    pub fn find(&self, id: u32, text: &str) -> Option<(usize, usize)> {
        let idx = self.patterns.iter().position(|p| p.id == id)?;
        self.singles[idx].find(text).map(|m| (m.start(), m.end()))
    }
}

/// A post that passed the regex filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    #[serde(flatten)]
    pub post: Post,
    pub matched_ids: Vec<u32>,
}

/// Keeps posts matching at least one pattern, marking them as potential candidates.
pub fn filter_candidates<'a, I>(posts: I, regexes: &'a RegexSet) -> impl Iterator<Item = Candidate> + 'a
where
    I: IntoIterator<Item = Post>,
    I::IntoIter: 'a,
{
    posts.into_iter().filter_map(move |mut post| {
        let matched_ids = regexes.matching_ids(&post.text);
        if matched_ids.is_empty() {
            return None;
        }
        post.kind = PostKind::PotentialCandidate;
        Some(Candidate { post, matched_ids })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierVerdict {
    pub is_request: bool,
    pub is_offer: bool,
    pub resource: Option<Resource>,
    pub confidence: f64,
}

impl ClassifierVerdict {
    pub fn kind(&self) -> PostKind {
        match (self.is_request, self.is_offer) {
            (true, _) => PostKind::Request,
            (false, true) => PostKind::Offer,
            _ => PostKind::Other,
        }
    }
}

/// Outcome of one binary stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageOutcome {
    pub positive: bool,
    pub confidence: f64,
}

/// A classifier backend answering the three cascade tasks.
pub trait ClassifierPlugin: Send + Sync {
    fn is_request(&self, post: &Post) -> std::result::Result<StageOutcome, String>;
    fn is_offer(&self, post: &Post) -> std::result::Result<StageOutcome, String>;
    fn resource(&self, post: &Post) -> std::result::Result<Option<Resource>, String>;
}

/// Runs request-vs-rest, then offer-vs-other, then resource typing, and
/// records the verdict on the post.
pub fn classify(post: &mut Post, classifier: &dyn ClassifierPlugin) -> Result<ClassifierVerdict> {
    let fail = |reason: String| Error::PluginFailure { id: post.id.clone(), reason };
    let request = classifier.is_request(post).map_err(fail)?;
    let (is_offer, confidence) = if request.positive {
        (false, request.confidence)
    } else {
        let offer = classifier.is_offer(post).map_err(fail)?;
        (offer.positive, offer.confidence)
    };
    let resource = if request.positive || is_offer {
        classifier.resource(post).map_err(fail)?
    } else {
        None
    };
    let verdict = ClassifierVerdict {
        is_request: request.positive,
        is_offer,
        resource,
        confidence: confidence.clamp(0.0, 1.0),
    };
    post.kind = verdict.kind();
    post.resource = verdict.resource;
    Ok(verdict)
}

const REQUEST_CUES: &[&str] = &[
    r"\bneeds?\b",
    r"\bneeded\b",
    r"\bneeding\b",
    r"\bin need\b",
    r"\bseeking\b",
    r"\blooking for\b",
    r"\brequire[sd]?\b",
    r"\burgent(ly)?\b",
    r"\bplease help\b",
    r"\bcan (any|some)(one|body)\b",
    r"\banyone\b",
    r"\bshortage\b",
    r"\brunning out\b",
    r"\bdesperate(ly)?\b",
    r"\bsos\b",
];

const OFFER_CUES: &[&str] = &[
    r"\boffer(ing|s)?\b",
    r"\bprovid(e|es|ing)\b",
    r"\bdonat(e|ing)\b",
    r"\bi have\b",
    r"\bwe have\b",
    r"\bi've got\b",
    r"\bavailable\b",
    r"\b(prepared|ready|willing|happy) to\b",
    r"\bgiving\b",
    r"\breach out\b",
    r"\bcontact (me|us)\b",
    r"\bfree\b",
    r"\bhere to help\b",
    r"\bcan help\b",
    r"\bbringing\b",
    r"\bspare\b",
    r"\borganizing\b",
];

const RESOURCE_CUES: &[(Resource, &str)] = &[
    (Resource::Money, r"\b(money|cash|funds?|fundraiser|fundraising|donations?|dollars|\$\d+)\b"),
    (Resource::Volunteer, r"\b(volunteers?|volunteering|helpers|hands)\b"),
    (Resource::Cloth, r"\b(cloth|clothes|clothing|jackets?|sweaters?|blankets?|jerseys?|gloves?|jeans|coats?)\b"),
    (Resource::Shelter, r"\b(shelter|accommodation|housing|place to stay|roof|beds?|evacuation cent(er|re))\b"),
    (Resource::Medical, r"\b(medical|medications?|medicines?|first aid|hospital|blood|doctors?|nurses?|masks?|ppe|pharmacy|insulin)\b"),
    (Resource::Food, r"\b(food|groceries|meals?|water|bottled|bread|formula|canned|hungry)\b"),
];

fn compile_cues(cues: &[&str]) -> Vec<Regex> {
    cues.iter()
        .map(|c| RegexBuilder::new(&ascii_word_boundaries(c)).case_insensitive(true).build().unwrap())
        .collect()
}

/// Keyword/cue-phrase classifier; runnable without any model runtime.
pub struct HeuristicClassifier {
    request: Vec<Regex>,
    offer: Vec<Regex>,
    resource: Vec<(Resource, Regex)>,
}

impl Default for HeuristicClassifier {
    fn default() -> Self {
        Self {
            request: compile_cues(REQUEST_CUES),
            offer: compile_cues(OFFER_CUES),
            resource: RESOURCE_CUES
                .iter()
                .map(|(r, c)| (*r, RegexBuilder::new(&ascii_word_boundaries(c)).case_insensitive(true).build().unwrap()))
                .collect(),
        }
    }
}

impl HeuristicClassifier {
    fn score(cues: &[Regex], text: &str) -> usize {
        cues.iter().map(|re| re.find_iter(text).count()).sum()
    }

    fn scores(&self, post: &Post) -> (usize, usize) {
        (Self::score(&self.request, &post.text), Self::score(&self.offer, &post.text))
    }
}

fn confidence(winner: usize, loser: usize) -> f64 {
    winner as f64 / (winner + loser + 1) as f64
}

impl ClassifierPlugin for HeuristicClassifier {
    fn is_request(&self, post: &Post) -> std::result::Result<StageOutcome, String> {
        let (req, off) = self.scores(post);
        let positive = req > off;
        Ok(StageOutcome {
            positive,
            confidence: if positive { confidence(req, off) } else { confidence(off + 1, req) },
        })
    }

    fn is_offer(&self, post: &Post) -> std::result::Result<StageOutcome, String> {
        let (req, off) = self.scores(post);
        let positive = off > 0 && off >= req;
        Ok(StageOutcome {
            positive,
            confidence: if positive { confidence(off, req) } else { confidence(1, off) },
        })
    }

    fn resource(&self, post: &Post) -> std::result::Result<Option<Resource>, String> {
        // highest cue count wins; ties go to the earlier category
        let best = self
            .resource
            .iter()
            .map(|(r, re)| (*r, re.find_iter(&post.text).count()))
            .filter(|&(_, n)| n > 0)
            .fold(None::<(Resource, usize)>, |best, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        Ok(best.map(|(r, _)| r))
    }
}

/// One line of an external verdict file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExternalVerdict {
    pub id: String,
    pub kind: String,
    #[serde(default)]
    pub resource: Option<String>,
    #[serde(default)]
    pub confidence: Option<f64>,
}

/// Replays verdicts produced offline, keyed by post id.
pub struct ExternalClassifier {
    verdicts: HashMap<String, (PostKind, Option<Resource>, f64)>,
}

impl ExternalClassifier {
    pub fn from_verdicts(verdicts: Vec<ExternalVerdict>) -> Result<Self> {
        let mut map = HashMap::with_capacity(verdicts.len());
        for v in verdicts {
            let kind: PostKind = v.kind.parse()?;
            let resource = v.resource.as_deref().map(str::parse).transpose()?;
            map.insert(v.id, (kind, resource, v.confidence.unwrap_or(1.0)));
        }
        Ok(Self { verdicts: map })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_verdicts(crate::io::read_jsonl(path)?)
    }

    fn lookup(&self, post: &Post) -> std::result::Result<&(PostKind, Option<Resource>, f64), String> {
        self.verdicts.get(&post.id).ok_or_else(|| "no external verdict for this id".to_string())
    }
}

impl ClassifierPlugin for ExternalClassifier {
    fn is_request(&self, post: &Post) -> std::result::Result<StageOutcome, String> {
        let (kind, _, conf) = self.lookup(post)?;
        Ok(StageOutcome { positive: *kind == PostKind::Request, confidence: *conf })
    }

    fn is_offer(&self, post: &Post) -> std::result::Result<StageOutcome, String> {
        let (kind, _, conf) = self.lookup(post)?;
        Ok(StageOutcome { positive: *kind == PostKind::Offer, confidence: *conf })
    }

    fn resource(&self, post: &Post) -> std::result::Result<Option<Resource>, String> {
        Ok(self.lookup(post)?.1)
    }
}

/// Named classifier backends, filled during startup.
#[derive(Default)]
pub struct PluginRegistry {
    plugins: BTreeMap<String, Box<dyn ClassifierPlugin>>,
}

impl PluginRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// A registry holding the `heuristic` backend.
    pub fn with_heuristic() -> Self {
        let mut r = Self::new();
        r.register("heuristic", Box::new(HeuristicClassifier::default())).unwrap();
        r
    }

    pub fn register(&mut self, name: &str, plugin: Box<dyn ClassifierPlugin>) -> Result<()> {
        if self.plugins.contains_key(name) {
            return Err(Error::DuplicateName(name.to_string()));
        }
        self.plugins.insert(name.to_string(), plugin);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&dyn ClassifierPlugin> {
        self.plugins.get(name).map(|b| b.as_ref()).ok_or_else(|| Error::UnknownPlugin(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.plugins.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_patterns_compile() {
        let set = RegexSet::builtin();
        assert_eq!(set.ids().collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn request_example_matches_pattern_4() {
        let set = RegexSet::builtin();
        let ids = set.matching_ids("Seeking assistance for food and essentials in the aftermath of the Hurricane.");
        assert!(ids.contains(&4), "{ids:?}");
    }

    #[test]
    fn matching_is_case_insensitive_and_sorted() {
        let set = RegexSet::builtin();
        assert_eq!(set.matching_ids("DONATE clothes, need HELP?"), vec![1, 2, 3, 4, 5]);
        assert!(set.matching_ids("the sky is blue today").is_empty());
    }

    #[test]
    fn word_boundaries_are_ascii() {
        let set = RegexSet::new([(1, r"\bhelp\b")]).unwrap();
        // with Unicode boundaries "éhelp" would not match; with ASCII ones é is a non-word byte
        assert!(set.is_match("éhelp"));
        assert!(!set.is_match("helpful"));
    }

    #[test]
    fn bad_pattern_and_duplicate_id() {
        assert!(matches!(RegexSet::new([(7, "(unclosed")]), Err(Error::Pattern { id: 7, .. })));
        assert!(matches!(RegexSet::new([(1, "a"), (1, "b")]), Err(Error::DuplicatePatternId(1))));
    }

    #[test]
    fn pattern_file_parsing() {
        let entries = RegexSet::parse_pattern_file("# comment\n\\bneed\\b\n\n  \\bwater\\b  \n", 6);
        assert_eq!(entries, vec![(6, r"\bneed\b".to_string()), (7, r"\bwater\b".to_string())]);
    }

    #[test]
    fn filter_drops_non_matching() {
        let set = RegexSet::builtin();
        let posts = vec![Post::new("a", "the sky is blue today"), Post::new("b", "Volunteers needed!")];
        let out: Vec<_> = filter_candidates(posts, &set).collect();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].post.id, "b");
        assert_eq!(out[0].post.kind, PostKind::PotentialCandidate);
        assert_eq!(out[0].matched_ids, vec![1]);
    }

    #[test]
    fn heuristic_cascade_on_table_examples() {
        let h = HeuristicClassifier::default();
        let mut req = Post::new(
            "r",
            "Need medical supplies in Melbourne's inner city. First aid kits, medications, and basic medical supplies are urgently required for disaster victims.",
        );
        let v = classify(&mut req, &h).unwrap();
        assert!(v.is_request && !v.is_offer);
        assert_eq!(v.resource, Some(Resource::Medical));
        assert_eq!(req.kind, PostKind::Request);

        let mut off = Post::new(
            "o",
            "Inner city residents, I'm prepared to provide medical supplies. I have first aid kits, medications, and basic medical supplies. Reach out if you need assistance!",
        );
        let v = classify(&mut off, &h).unwrap();
        assert!(v.is_offer && !v.is_request);
        assert_eq!(v.resource, Some(Resource::Medical));

        let mut other = Post::new("x", "hello world");
        let v = classify(&mut other, &h).unwrap();
        assert!(!v.is_request && !v.is_offer);
        assert_eq!(v.resource, None);
        assert_eq!(other.kind, PostKind::Other);
    }

    #[test]
    fn registry_rejects_duplicates() {
        let mut reg = PluginRegistry::with_heuristic();
        assert!(reg.get("heuristic").is_ok());
        let dup = reg.register("heuristic", Box::new(HeuristicClassifier::default()));
        assert!(matches!(dup, Err(Error::DuplicateName(n)) if n == "heuristic"));
        assert!(matches!(reg.get("nope"), Err(Error::UnknownPlugin(_))));
    }

    #[test]
    fn external_plugin_passthrough() {
        let ext = ExternalClassifier::from_verdicts(vec![ExternalVerdict {
            id: "p1".into(),
            kind: "request".into(),
            resource: Some("food".into()),
            confidence: Some(0.9),
        }])
        .unwrap();
        let mut reg = PluginRegistry::new();
        reg.register("external", Box::new(ext)).unwrap();
        let mut post = Post::new("p1", "anything");
        let v = classify(&mut post, reg.get("external").unwrap()).unwrap();
        assert_eq!(post.kind, PostKind::Request);
        assert_eq!(post.resource, Some(Resource::Food));
        assert!((v.confidence - 0.9).abs() < 1e-12);

        let mut unknown = Post::new("p2", "x");
        let err = classify(&mut unknown, reg.get("external").unwrap()).unwrap_err();
        assert!(matches!(err, Error::PluginFailure { id, .. } if id == "p2"));
    }
}
