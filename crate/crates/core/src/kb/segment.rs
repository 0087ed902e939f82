//! Rule-based sentence segmentation for plot summaries.
//!
//! Paragraphs (blank-line separated) always end a sentence. Inside a
//! paragraph a sentence ends after terminal punctuation, optionally followed
//! by closing quotes or brackets, when no quotation is open and the next word
//! starts like a sentence. Known abbreviations and single-letter initials do
//! not end a sentence.

use super::KbError;

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "st", "jr", "sr", "lt", "col", "gen", "capt", "cpt", "sgt", "prof",
    "rev", "gov", "sen", "rep", "mt", "ft", "vs", "etc", "no", "vol", "fig", "inc", "ltd", "co",
];

#[derive(Default)]
struct QuoteState {
    double: bool,
    curly_double: bool,
    single: bool,
}

impl QuoteState {
    fn open(&self) -> bool {
        self.double || self.curly_double || self.single
    }
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '…')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '“' | '‘' | '(' | '[')
}

/// Splits raw plot text into sentences.
///
/// Whitespace runs inside a sentence are collapsed to one space; no other
/// character is dropped.
pub fn segment_plot(raw_text: &str) -> Result<Vec<String>, KbError> {
    if raw_text.trim().is_empty() {
        return Err(KbError::InvalidInput("plot text is empty".into()));
    }
    let mut out = Vec::new();
    for paragraph in paragraphs(raw_text) {
        segment_paragraph(paragraph, &mut out);
    }
    Ok(out)
}

fn paragraphs(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut offset = 0;
    let mut prev_blank = false;
    for line in text.split_inclusive('\n') {
        let blank = line.trim().is_empty();
        if blank && !prev_blank {
            out.push(&text[start..offset]);
        }
        if !blank && prev_blank {
            start = offset;
        }
        prev_blank = blank;
        offset += line.len();
    }
    if !prev_blank {
        out.push(&text[start..]);
    }
    out.into_iter().filter(|p| !p.trim().is_empty()).collect()
}

fn push_sentence(out: &mut Vec<String>, raw: &str) {
    let s = raw.split_whitespace().collect::<Vec<_>>().join(" ");
    if !s.is_empty() {
        out.push(s);
    }
}

fn segment_paragraph(text: &str, out: &mut Vec<String>) {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let n = chars.len();
    let mut quotes = QuoteState::default();
    let mut sentence_start = 0usize;
    let mut i = 0usize;

    let prev_char = |i: usize| if i == 0 { None } else { Some(chars[i - 1].1) };
    let next_char = |i: usize| chars.get(i + 1).map(|&(_, c)| c);

    while i < n {
        let c = chars[i].1;
        match c {
            '"' => quotes.double = !quotes.double,
            '“' => quotes.curly_double = true,
            '”' => quotes.curly_double = false,
            '\'' | '‘' | '’' => {
                let before_word = prev_char(i).is_none_or(|p| p.is_whitespace() || p == '(' || p == '[' || p == '"' || p == '“');
                let after_word = next_char(i).is_some_and(char::is_alphanumeric);
                if before_word && after_word && c != '’' {
                    quotes.single = true;
                } else if quotes.single && !after_word {
                    quotes.single = false;
                }
            }
            _ => {}
        }

        if !is_terminal(c) {
            i += 1;
            continue;
        }

        let run_start = i;
        let mut j = i;
        while j < n && is_terminal(chars[j].1) {
            j += 1;
        }
        let run_end = j;
        // Closing quotes and brackets stay with the sentence they end.
        while j < n {
            match chars[j].1 {
                '"' if quotes.double => quotes.double = false,
                '”' => quotes.curly_double = false,
                '\'' | '’' if quotes.single => quotes.single = false,
                ')' | ']' => {}
                _ => break,
            }
            j += 1;
        }

        let at_end = j >= n;
        let boundary = if quotes.open() {
            false
        } else if at_end {
            true
        } else if !chars[j].1.is_whitespace() {
            false
        } else {
            let mut k = j;
            while k < n && chars[k].1.is_whitespace() {
                k += 1;
            }
            if k >= n {
                true
            } else {
                let next = chars[k].1;
                let starts_sentence = next.is_uppercase() || next.is_numeric() || is_opener(next);
                let single_period = run_end - run_start == 1 && chars[run_start].1 == '.';
                starts_sentence && !(single_period && ends_with_abbreviation(text, chars[run_start].0))
            }
        };

        if boundary {
            let end = if at_end { text.len() } else { chars[j].0 };
            push_sentence(out, &text[sentence_start..end]);
            sentence_start = end;
        }
        i = j.max(i + 1);
    }
    push_sentence(out, &text[sentence_start..]);
}

fn ends_with_abbreviation(text: &str, period_at: usize) -> bool {
    let before = &text[..period_at];
    let word: String = before
        .chars()
        .rev()
        .take_while(|c| c.is_alphabetic())
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    if word.is_empty() {
        return false;
    }
    let mut cs = word.chars();
    let single_initial = cs.next().is_some_and(char::is_uppercase) && cs.next().is_none();
    single_initial || ABBREVIATIONS.contains(&word.to_lowercase().as_str())
}
