use std::ops::Range;
use std::sync::OnceLock;

use regex::Regex;

/// Byte ranges of `#` comments in Python source, each from the `#` up to
/// (not including) the line break. String literals, including triple-quoted
/// ones, are skipped so a `#` inside a string is not a comment.
pub fn python_comment_spans(source: &str) -> Vec<Range<usize>> {
    let b = source.as_bytes();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            b'#' => {
                let end = b[i..]
                    .iter()
                    .position(|&c| c == b'\n' || c == b'\r')
                    .map_or(b.len(), |p| i + p);
                spans.push(i..end);
                i = end;
            }
            q @ (b'\'' | b'"') => {
                let triple = b.len() >= i + 3 && b[i + 1] == q && b[i + 2] == q;
                i += if triple { 3 } else { 1 };
                while i < b.len() {
                    let c = b[i];
                    if c == b'\\' {
                        i += 2;
                        continue;
                    }
                    if triple {
                        if c == q && b.len() >= i + 3 && b[i + 1] == q && b[i + 2] == q {
                            i += 3;
                            break;
                        }
                    } else if c == q {
                        i += 1;
                        break;
                    } else if c == b'\n' {
                        // Unterminated single-line string: resume scanning code.
                        break;
                    }
                    i += 1;
                }
            }
            _ => i += 1,
        }
    }
    spans
}

fn identity_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(concat!(
            r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}",
            r"|(?i:\bhttps?://|\bwww\.)",
            r"|(?i:@?\bauthor\b|\bcreated\s+by\b|\bwritten\s+by\b|\bcopyright\b|\(c\)|\bmaintainer\b|\bcontact\b)",
        ))
        .expect("valid identity pattern")
    })
}

/// True if a comment looks like it identifies its author.
pub fn reveals_identity(comment: &str) -> bool {
    identity_pattern().is_match(comment)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScrubOutcome {
    pub source: String,
    pub comments_removed: usize,
    pub comments_stripped: usize,
}

impl ScrubOutcome {
    pub fn changed(&self) -> bool {
        self.comments_removed + self.comments_stripped > 0
    }
}

/// Remove comments that reveal an identity and drop non-ASCII characters
/// from the remaining comments. Bytes outside comments are never touched.
pub fn privacy_scrub(source: &str) -> ScrubOutcome {
    let mut out = String::with_capacity(source.len());
    let mut last = 0;
    let (mut removed, mut stripped) = (0, 0);
    for span in python_comment_spans(source) {
        out.push_str(&source[last..span.start]);
        let comment = &source[span.clone()];
        let ascii: String = comment.chars().filter(char::is_ascii).collect();
        // Check the stripped text too: removing a letter can expose a word.
        if reveals_identity(comment) || reveals_identity(&ascii) {
            removed += 1;
        } else if ascii.len() == comment.len() {
            out.push_str(comment);
        } else {
            stripped += 1;
            out.push_str(&ascii);
        }
        last = span.end;
    }
    out.push_str(&source[last..]);
    ScrubOutcome {
        source: out,
        comments_removed: removed,
        comments_stripped: stripped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn code_only(src: &str) -> String {
        let mut out = String::new();
        let mut last = 0;
        for s in python_comment_spans(src) {
            out.push_str(&src[last..s.start]);
            last = s.end;
        }
        out.push_str(&src[last..]);
        out
    }

    #[test]
    fn spans_skip_strings() {
        let src = "x = '#no'  # yes\ny = \"\"\"\n# still string\n\"\"\"  # c2\nz = \"a\\\"#\" # c3";
        let spans: Vec<&str> = python_comment_spans(src).into_iter().map(|r| &src[r]).collect();
        assert_eq!(spans, ["# yes", "# c2", "# c3"]);
    }

    #[test]
    fn author_comment_removed() {
        let out = privacy_scrub("# author: jane@example.com\nprint(1)\n");
        assert_eq!(out.source, "\nprint(1)\n");
        assert_eq!(out.comments_removed, 1);
    }

    #[test]
    fn identity_patterns() {
        for c in [
            "# see https://example.org/u/9",
            "# Created by PyCharm",
            "# contact: someone at somewhere",
            "# foo.bar@mail.example.cn",
            "# @Author : zzz",
        ] {
            assert!(reveals_identity(c), "{c}");
        }
        for c in ["# read input", "# O(n log n) with a heap", "# 2 authors? no"] {
            assert!(!reveals_identity(c), "{c}");
        }
    }

    #[test]
    fn non_ascii_comment_text_is_stripped() {
        let src = "n = int(input())  # 输入 n\nprint(n)\n";
        let out = privacy_scrub(src);
        assert_eq!(out.source, "n = int(input())  #  n\nprint(n)\n");
        assert_eq!(out.comments_stripped, 1);
        assert_eq!(code_only(&out.source), code_only(src));
    }

    #[test]
    fn stripping_cannot_expose_an_identity() {
        let out = privacy_scrub("x = 1  #authoré\n");
        assert_eq!(out.source, "x = 1  \n");
        assert_eq!(out.comments_removed, 1);
    }

    #[test]
    fn string_literals_untouched() {
        let src = "print('héllo # 世界')\ns = \"\"\"author: x@y.com\"\"\"\n";
        let out = privacy_scrub(src);
        assert_eq!(out.source, src);
        assert!(!out.changed());
    }

    proptest! {
        #[test]
        fn only_comment_bytes_change(src in "([a-z =()'\"#\\\\\n]|é|@|x@y\\.io|author){0,80}") {
            let out = privacy_scrub(&src);
            prop_assert_eq!(code_only(&out.source), code_only(&src));
            // Scrubbing is idempotent.
            prop_assert_eq!(privacy_scrub(&out.source).source, out.source.clone());
        }
    }
}
