use std::fmt;

/// Per-token span label. Declaration order is the argmax tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BioLabel {
    O = 0,
    B = 1,
    I = 2,
    E = 3,
}

impl BioLabel {
    pub const ALL: [BioLabel; 4] = [BioLabel::O, BioLabel::B, BioLabel::I, BioLabel::E];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(k: usize) -> Self {
        Self::ALL[k]
    }

    /// Labels for an entity of `n` tokens; a single token is a lone `B`.
    pub fn span(n: usize) -> Vec<BioLabel> {
        match n {
            0 => Vec::new(),
            1 => vec![BioLabel::B],
            _ => {
                let mut v = vec![BioLabel::B];
                v.extend(std::iter::repeat_n(BioLabel::I, n - 2));
                v.push(BioLabel::E);
                v
            }
        }
    }
}

impl fmt::Display for BioLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BioLabel::O => "O",
            BioLabel::B => "B",
            BioLabel::I => "I",
            BioLabel::E => "E",
        };
        f.write_str(s)
    }
}

/// Token index ranges `[start, end)` of the spans encoded by `labels`.
///
/// `B I* E` yields the whole run. A `B` that is not closed by an `E` before
/// the next `B`, `O` or the end of the line yields just its own token.
/// `I`/`E` outside an open span are ignored.
pub fn decode_ranges(labels: &[BioLabel]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut open: Option<usize> = None;
    for (k, label) in labels.iter().enumerate() {
        match label {
            BioLabel::O => {
                if let Some(s) = open.take() {
                    out.push((s, s + 1));
                }
            }
            BioLabel::B => {
                if let Some(s) = open.replace(k) {
                    out.push((s, s + 1));
                }
            }
            BioLabel::I => {}
            BioLabel::E => {
                if let Some(s) = open.take() {
                    out.push((s, k + 1));
                }
            }
        }
    }
    if let Some(s) = open {
        out.push((s, s + 1));
    }
    out
}

/// Word sequences encoded by `labels` over `tokens`.
pub fn decode_spans<S: AsRef<str>>(tokens: &[S], labels: &[BioLabel]) -> Vec<Vec<String>> {
    assert_eq!(tokens.len(), labels.len(), "one label per token");
    decode_ranges(labels)
        .into_iter()
        .map(|(s, e)| tokens[s..e].iter().map(|t| t.as_ref().to_string()).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::BioLabel::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fried_onions_line() {
        let toks = ["1/4", "cup", "french", "fried", "onions"];
        assert_eq!(
            decode_spans(&toks, &[O, O, B, I, E]),
            vec![vec!["french", "fried", "onions"]]
        );
        assert!(decode_spans(&toks, &[O; 5]).is_empty());
    }

    #[test]
    fn lone_b_is_a_single_token_span() {
        let toks = ["salt", "and", "tomato", "sauce"];
        assert_eq!(
            decode_spans(&toks, &[B, O, B, E]),
            vec![vec!["salt"], vec!["tomato", "sauce"]]
        );
        // unterminated run keeps only its B token
        assert_eq!(decode_spans(&toks, &[B, I, I, O]), vec![vec!["salt"]]);
        // stray I/E are ignored
        assert_eq!(decode_spans(&toks, &[I, E, O, B]), vec![vec!["sauce"]]);
    }

    #[test]
    fn span_labels() {
        assert_eq!(BioLabel::span(1), vec![B]);
        assert_eq!(BioLabel::span(3), vec![B, I, E]);
    }

    proptest! {
        #[test]
        fn spans_are_ordered_and_disjoint(ls in proptest::collection::vec(0usize..4, 0..30)) {
            let labels: Vec<BioLabel> = ls.into_iter().map(BioLabel::from_index).collect();
            let ranges = decode_ranges(&labels);
            let mut last_end = 0;
            for (s, e) in ranges {
                prop_assert!(s < e && e <= labels.len());
                prop_assert!(s >= last_end);
                last_end = e;
            }
        }
    }
}
