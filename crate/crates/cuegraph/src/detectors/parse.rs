//! Verdict extraction from free-form model answers.

use crate::error::{Error, Result};

/// Filler tokens allowed before the verdict word in a clause, so that
/// "Final answer: yes", "I would say no", "The verdict is yes" all parse.
const STRIP_WORDS: &[&str] = &[
    "final", "answer", "verdict", "decision", "conclusion", "response", "a", "my", "the", "is",
    "it", "s", "i", "would", "say", "so", "therefore", "thus", "overall", "actually", "in",
    "short",
];

fn scan_clause(clause: &str) -> Option<bool> {
    for word in clause
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
    {
        let w = word.to_lowercase();
        if STRIP_WORDS.contains(&w.as_str()) {
            continue;
        }
        return match w.as_str() {
            "yes" => Some(true),
            "no" => Some(false),
            _ => None,
        };
    }
    None
}

fn scan_line(line: &str) -> Option<bool> {
    line.split(['.', '!', '?', ';', ':']).find_map(scan_clause)
}

/// Extract a yes/no verdict from a model response. Lines are scanned from
/// the end, so with reasoning output the final verdict-bearing line wins;
/// within a line, the first clause whose leading word (after filler) is
/// "yes" or "no" decides.
pub fn parse_answer(raw: &str) -> Result<bool> {
    raw.lines()
        .rev()
        .find_map(scan_line)
        .ok_or_else(|| Error::AnswerParse {
            raw: raw.to_string(),
        })
}
