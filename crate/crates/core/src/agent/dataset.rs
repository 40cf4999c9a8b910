//! Transition dataset file: one transition per line,
//! `<36 state floats> <action> <reward> <36 next-state floats> <done>`,
//! space-separated. Lines starting with `#` are comments.

use std::fmt::Write;

use super::{StateVector, Transition};
use crate::neural::{NUM_ACTIONS, STATE_DIM};
use crate::{Error, Result};

const FIELDS: usize = 2 * STATE_DIM + 3;

/// Consecutive transitions of one exploration run; only the last is `done`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Episode {
    pub transitions: Vec<Transition>,
}

pub fn write_dataset<'a>(episodes: impl IntoIterator<Item = &'a Episode>, header: &str) -> String {
    let mut out = String::new();
    for line in header.lines() {
        writeln!(out, "# {line}").unwrap();
    }
    for ep in episodes {
        for t in &ep.transitions {
            for v in t.state.as_slice() {
                write!(out, "{v} ").unwrap();
            }
            write!(out, "{} {} ", t.action, t.reward).unwrap();
            for v in t.next_state.as_slice() {
                write!(out, "{v} ").unwrap();
            }
            writeln!(out, "{}", u8::from(t.done)).unwrap();
        }
    }
    out
}

/// Parses a dataset, splitting episodes after every `done = 1` transition.
pub fn parse_dataset(text: &str) -> Result<Vec<Episode>> {
    let mut episodes = Vec::new();
    let mut current = Episode::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let t = parse_line(line).map_err(|message| Error::Dataset { line: i + 1, message })?;
        let done = t.done;
        current.transitions.push(t);
        if done {
            episodes.push(std::mem::take(&mut current));
        }
    }
    if !current.transitions.is_empty() {
        episodes.push(current);
    }
    Ok(episodes)
}

fn parse_line(line: &str) -> std::result::Result<Transition, String> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() != FIELDS {
        return Err(format!("{} fields, expected {FIELDS}", tokens.len()));
    }
    let float = |t: &str| -> std::result::Result<f64, String> {
        let v: f64 = t.parse().map_err(|_| format!("bad number {t:?}"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("non-finite number {t:?}"))
        }
    };
    let state: Vec<f64> = tokens[..STATE_DIM].iter().map(|t| float(t)).collect::<Result<_, _>>()?;
    let action: usize = tokens[STATE_DIM]
        .parse()
        .map_err(|_| format!("bad action {:?}", tokens[STATE_DIM]))?;
    if action >= NUM_ACTIONS {
        return Err(format!("action {action} out of range"));
    }
    let reward = float(tokens[STATE_DIM + 1])?;
    let next: Vec<f64> = tokens[STATE_DIM + 2..FIELDS - 1]
        .iter()
        .map(|t| float(t))
        .collect::<Result<_, _>>()?;
    let done = match tokens[FIELDS - 1] {
        "0" => false,
        "1" => true,
        other => return Err(format!("done flag {other:?} is not 0 or 1")),
    };
    Ok(Transition {
        state: StateVector::from_slice(&state).map_err(|e| e.to_string())?,
        action,
        reward,
        next_state: StateVector::from_slice(&next).map_err(|e| e.to_string())?,
        done,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn transition(seed: f64, done: bool) -> Transition {
        let mut s = [0.0; STATE_DIM];
        s.iter_mut().enumerate().for_each(|(i, v)| *v = seed + i as f64 / 7.0);
        let mut n = s;
        n[0] += 0.125;
        Transition {
            state: StateVector(s),
            action: 3,
            reward: -10.0,
            next_state: StateVector(n),
            done,
        }
    }

    #[test]
    fn round_trip_and_episode_split() {
        let episodes = vec![
            Episode {
                transitions: vec![transition(0.1, false), transition(0.2, true)],
            },
            Episode {
                transitions: vec![transition(0.3, true)],
            },
        ];
        let text = write_dataset(&episodes, "house\nseeds 1..2");
        assert!(text.starts_with("# house\n# seeds 1..2\n"));
        assert_eq!(parse_dataset(&text).unwrap(), episodes);
    }

    #[test]
    fn rejects_bad_lines() {
        let good = write_dataset(
            &[Episode {
                transitions: vec![transition(0.0, true)],
            }],
            "",
        );
        let short = good.trim_end().rsplit_once(' ').unwrap().0;
        assert!(matches!(parse_dataset(short), Err(Error::Dataset { line: 1, .. })));
        let bad_done = format!("{}2\n", &good[..good.len() - 2]);
        assert!(parse_dataset(&bad_done).is_err());
        assert!(parse_dataset("# only a comment\n").unwrap().is_empty());
    }
}
