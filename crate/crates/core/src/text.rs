//! Tweet-style text normalization applied before filtering and encoding.

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;

use crate::error::Result;

pub const URL_TOKEN: &str = "HTTPURL";
pub const MENTION_TOKEN: &str = "@MENTION";

const EMOJI_TABLE: &str = include_str!("../data/emoji-v1.tsv");

// A single pass can expose new work for an earlier rule (an entity that
// decodes to a mention, a repaired byte run that decodes to an emoji), so
// passes repeat until the text stops changing.
const MAX_PASSES: usize = 8;

fn url_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:\bhttps?://|\bwww\.)\S+").unwrap())
}

fn mention_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\B@\w+").unwrap())
}

fn emoji_names() -> &'static HashMap<char, &'static str> {
    static TABLE: OnceLock<HashMap<char, &'static str>> = OnceLock::new();
    TABLE.get_or_init(|| parse_emoji_table(EMOJI_TABLE))
}

fn parse_emoji_table(src: &'static str) -> HashMap<char, &'static str> {
    src.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .filter_map(|l| {
            let (cp, name) = l.split_once('\t')?;
            let code = u32::from_str_radix(cp.trim().trim_start_matches("U+"), 16).ok()?;
            Some((char::from_u32(code)?, name.trim()))
        })
        .collect()
}

/// Number of entries in the shipped emoji table.
pub fn emoji_table_len() -> usize {
    emoji_names().len()
}

/// Normalizes raw post text.
///
/// Rules, in order: URLs become `HTTPURL`, @-mentions become `@MENTION`, HTML
/// entities are decoded, newlines are dropped and whitespace runs collapse to
/// one space, common UTF-8-as-CP1252 double encodings are repaired, and known
/// emoji become `:short_name:`. The result is a fixed point of the rules.
pub fn preprocess_text(raw: &str) -> String {
    let mut current = raw.to_string();
    for _ in 0..MAX_PASSES {
        let next = single_pass(&current);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

/// Byte-level entry point; rejects input that is not UTF-8.
pub fn preprocess_bytes(raw: &[u8]) -> Result<String> {
    let s = std::str::from_utf8(raw)?;
    Ok(preprocess_text(s))
}

fn single_pass(text: &str) -> String {
    let s = url_re().replace_all(text, URL_TOKEN);
    let s = mention_re().replace_all(&s, MENTION_TOKEN);
    let s = html_escape::decode_html_entities(&s);
    let s = collapse_whitespace(&s);
    let s = repair_mojibake(&s);
    replace_emoji(&s)
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Maps a char back to the CP1252 byte it would have been decoded from.
fn cp1252_byte(c: char) -> Option<u8> {
    let b = match c {
        '\u{80}'..='\u{ff}' => c as u32 as u8,
        '€' => 0x80,
        '‚' => 0x82,
        'ƒ' => 0x83,
        '„' => 0x84,
        '…' => 0x85,
        '†' => 0x86,
        '‡' => 0x87,
        'ˆ' => 0x88,
        '‰' => 0x89,
        'Š' => 0x8a,
        '‹' => 0x8b,
        'Œ' => 0x8c,
        'Ž' => 0x8e,
        '‘' => 0x91,
        '’' => 0x92,
        '“' => 0x93,
        '”' => 0x94,
        '•' => 0x95,
        '–' => 0x96,
        '—' => 0x97,
        '˜' => 0x98,
        '™' => 0x99,
        'š' => 0x9a,
        '›' => 0x9b,
        'œ' => 0x9c,
        'ž' => 0x9e,
        'Ÿ' => 0x9f,
        _ => return None,
    };
    Some(b)
}

fn utf8_len(lead: u8) -> usize {
    match lead {
        0xc2..=0xdf => 2,
        0xe0..=0xef => 3,
        0xf0..=0xf4 => 4,
        _ => 0,
    }
}

/// Best-effort repair of text that was UTF-8 encoded, then decoded as CP1252
/// or Latin-1 (`Ã©` for `é`, `â€™` for `’`). Runs that do not re-decode as
/// valid UTF-8 are left alone.
fn repair_mojibake(s: &str) -> String {
    if s.is_ascii() {
        return s.to_string();
    }
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let width = cp1252_byte(c).map(utf8_len).unwrap_or(0);
        if width >= 2 && i + width <= chars.len() {
            let bytes: Option<Vec<u8>> = chars[i..i + width].iter().map(|&c| cp1252_byte(c)).collect();
            if let Some(decoded) = bytes.as_deref().and_then(|b| std::str::from_utf8(b).ok()) {
                out.push_str(decoded);
                i += width;
                continue;
            }
        }
        out.push(c);
        i += 1;
    }
    out
}

fn replace_emoji(s: &str) -> String {
    let table = emoji_names();
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        match table.get(&c) {
            Some(name) => {
                out.push(':');
                out.push_str(name);
                out.push(':');
                if chars.peek() == Some(&'\u{fe0f}') {
                    chars.next();
                }
            }
            None => out.push(c),
        }
    }
    out
}
