//! Exhaustive check of the three-phase conditions over a finite universe.

use crate::machine::Machine;
use crate::state::{Neighbourhood, State};

/// A transition breaking one of the three conditions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseViolation {
    pub from: State,
    pub neighbourhood: Vec<(State, u32)>,
    pub to: State,
    pub condition: u8,
}

/// Checks every state of `universe` against every neighbourhood of at
/// most `max_degree` neighbours drawn from `universe`. Phases are
/// `0, 1, 2`, read cyclically.
pub fn check_three_phase(
    m: &dyn Machine,
    phase: &dyn Fn(&State) -> Option<u8>,
    universe: &[State],
    max_degree: usize,
) -> Result<(), PhaseViolation> {
    let beta = m.beta();
    let phases: Vec<u8> = universe.iter().map(|q| phase(q).unwrap_or(u8::MAX)).collect();
    let mut counts = vec![0u32; universe.len()];
    loop {
        let total: u32 = counts.iter().sum();
        if total > 0 {
            let n = Neighbourhood::from_counts(universe.iter().cloned().zip(counts.iter().copied()), beta);
            let present = |p: u8| counts.iter().zip(&phases).any(|(&c, &x)| c > 0 && x == p);
            for (q, &i) in universe.iter().zip(&phases) {
                if i > 2 {
                    continue;
                }
                let to = m.delta(q, &n);
                let j = phase(&to);
                let prev = (i + 2) % 3;
                let next = (i + 1) % 3;
                let bad = if present(prev) && &to != q {
                    Some(1)
                } else if j != Some(i) && j != Some(next) {
                    Some(2)
                } else if present(next) && &to != q && j != Some(next) {
                    Some(3)
                } else {
                    None
                };
                if let Some(condition) = bad {
                    return Err(PhaseViolation {
                        from: q.clone(),
                        neighbourhood: n.iter().map(|(s, c)| (s.clone(), c)).collect(),
                        to,
                        condition,
                    });
                }
            }
        }
        // Next count vector with at most `max_degree` neighbours in total.
        let mut k = 0;
        loop {
            if k == counts.len() {
                return Ok(());
            }
            counts[k] += 1;
            let total: u32 = counts.iter().sum();
            if counts[k] <= beta.min(max_degree as u32) && total as usize <= max_degree {
                break;
            }
            counts[k] = 0;
            k += 1;
        }
    }
}
