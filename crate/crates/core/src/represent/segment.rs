use super::Segmenter;

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "e.g", "i.e", "u.s", "u.k", "u.s.a", "inc",
    "ltd", "co", "corp", "dept", "approx", "est", "fig", "mt", "ft", "jan", "feb", "aug", "sep", "sept",
    "oct", "nov", "dec", "p.s", "cf",
];

const CLOSERS: &[char] = &['"', '\'', ')', ']', '\u{2019}', '\u{201D}'];
const OPENERS: &[char] = &['"', '\'', '(', '[', '\u{2018}', '\u{201C}'];

/// Rule-based English sentence splitter.
///
/// A boundary is a run of `.`, `!` or `?` (optionally followed by closing
/// quotes or brackets) followed by whitespace and then an uppercase letter,
/// a digit, or an opening quote/bracket. A single `.` after a known
/// abbreviation or a lone initial is not a boundary. Blank lines are always
/// boundaries. Whitespace inside a sentence is collapsed to single spaces.
#[derive(Debug, Clone)]
pub struct RuleSegmenter {
    abbreviations: Vec<String>,
}

impl Default for RuleSegmenter {
    fn default() -> Self {
        Self { abbreviations: ABBREVIATIONS.iter().map(|s| s.to_string()).collect() }
    }
}

impl RuleSegmenter {
    pub fn with_abbreviations(mut self, extra: impl IntoIterator<Item = String>) -> Self {
        self.abbreviations.extend(extra.into_iter().map(|s| s.to_lowercase()));
        self
    }

    fn is_abbreviation(&self, chars: &[char], dot: usize) -> bool {
        let mut start = dot;
        while start > 0 && (chars[start - 1].is_alphanumeric() || chars[start - 1] == '.') {
            start -= 1;
        }
        let token: String = chars[start..dot].iter().collect::<String>().to_lowercase();
        let token = token.trim_start_matches('.');
        if token.is_empty() {
            return false;
        }
        if token.chars().count() == 1 && token.chars().all(char::is_alphabetic) {
            return true;
        }
        self.abbreviations.iter().any(|a| a == token)
    }

    fn split_paragraph(&self, paragraph: &str, out: &mut Vec<String>) {
        let chars: Vec<char> = paragraph.chars().collect();
        let mut start = 0;
        let mut i = 0;
        while i < chars.len() {
            if !matches!(chars[i], '.' | '!' | '?') {
                i += 1;
                continue;
            }
            let run_start = i;
            while i < chars.len() && matches!(chars[i], '.' | '!' | '?') {
                i += 1;
            }
            let single_dot = i - run_start == 1 && chars[run_start] == '.';
            while i < chars.len() && CLOSERS.contains(&chars[i]) {
                i += 1;
            }
            let end = i;
            if i >= chars.len() || !chars[i].is_whitespace() {
                continue;
            }
            let mut next = i;
            while next < chars.len() && chars[next].is_whitespace() {
                next += 1;
            }
            if next >= chars.len() {
                break;
            }
            let c = chars[next];
            let starts_sentence = c.is_uppercase() || c.is_ascii_digit() || OPENERS.contains(&c);
            let guarded = single_dot && self.is_abbreviation(&chars, run_start);
            if starts_sentence && !guarded {
                push_sentence(&chars[start..end], out);
                start = next;
            }
            i = next;
        }
        push_sentence(&chars[start..], out);
    }
}

fn push_sentence(chars: &[char], out: &mut Vec<String>) {
    let text: String = chars.iter().collect();
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if !collapsed.is_empty() {
        out.push(collapsed);
    }
}

impl Segmenter for RuleSegmenter {
    fn segment(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut paragraph = String::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                self.split_paragraph(&paragraph, &mut out);
                paragraph.clear();
            } else {
                if !paragraph.is_empty() {
                    paragraph.push('\n');
                }
                paragraph.push_str(line);
            }
        }
        self.split_paragraph(&paragraph, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seg(s: &str) -> Vec<String> {
        RuleSegmenter::default().segment(s)
    }

    #[test]
    fn two_terminated_sentences() {
        assert_eq!(seg("I lost my card. It was stolen."), vec!["I lost my card.", "It was stolen."]);
    }

    #[test]
    fn unterminated_tail() {
        assert_eq!(seg("What is APR"), vec!["What is APR"]);
    }

    #[test]
    fn decimal_is_not_a_boundary() {
        assert_eq!(seg("I paid $3.50. Then I left."), vec!["I paid $3.50.", "Then I left."]);
    }

    #[test]
    fn abbreviations_and_initials() {
        assert_eq!(
            seg("I moved to the U.S. Bank branch. Mr. Smith helped me. J. Doe agreed."),
            vec!["I moved to the U.S. Bank branch.", "Mr. Smith helped me.", "J. Doe agreed."]
        );
    }

    #[test]
    fn empty_and_whitespace() {
        assert!(seg("").is_empty());
        assert!(seg("  \n\t \n").is_empty());
    }

    #[test]
    fn blank_lines_are_boundaries() {
        assert_eq!(seg("Thanks in advance\n\nAny ideas"), vec!["Thanks in advance", "Any ideas"]);
    }

    #[test]
    fn quotes_and_question_marks() {
        assert_eq!(
            seg("He said \"no.\" What now? (Really!) 401k plans are odd..."),
            vec!["He said \"no.\"", "What now?", "(Really!)", "401k plans are odd..."]
        );
    }

    proptest! {
        #[test]
        fn preserves_non_whitespace_content(text in "[A-Za-z0-9 .!?$,\n'\"()]{0,200}") {
            let strip = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
            let joined: String = seg(&text).concat();
            prop_assert_eq!(strip(&joined), strip(&text));
        }
    }
}
