//! Threshold predicates `Σ a_i·x_i ≥ 0` on bounded-degree graphs.

use std::sync::Arc;

use crate::compile::{
    ad_payload, compile_absence_detection, compile_weak_broadcast, current, product_parts, product_with, remembered,
    wb_payload, CompiledAbsenceDetection, CompiledWeakBroadcast,
};
use crate::error::MachineError;
use crate::extended::{add_broadcasts, AbsenceDetectionMachine, BroadcastRules, DetectionRules, ResponseId, WeakBroadcastMachine};
use crate::graph::LabelledGraph;
use crate::machine::{Customized, Machine, MachineRef};
use crate::state::{Neighbourhood, State};

const NONE: &str = "0";
const LEADER: &str = "L";
const DOUBLE: &str = "Ldouble";
const BOX_LEADER: &str = "Lbox";
const BOT: &str = "bot";
const BOX: &str = "box";

/// Coefficients `a_1..a_l` and the degree bound `k`. Label `i` is the
/// `i`-th lowercase letter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThresholdSpec {
    pub coefficients: Vec<i64>,
    pub k: u32,
}

impl ThresholdSpec {
    pub fn new(coefficients: Vec<i64>, k: u32) -> Result<Self, MachineError> {
        if coefficients.is_empty() || coefficients.len() > 26 {
            return Err(MachineError::InvalidMachine("need between 1 and 26 coefficients".into()));
        }
        if k < 2 {
            return Err(MachineError::InvalidMachine("degree bound must be at least 2".into()));
        }
        Ok(ThresholdSpec { coefficients, k })
    }

    /// Largest contribution a node must store.
    pub fn bound(&self) -> i64 {
        self.coefficients.iter().map(|a| a.abs()).max().unwrap_or(0).max(2 * self.k as i64)
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.coefficients.len()).map(|i| ((b'a' + i as u8) as char).to_string()).collect()
    }

    pub fn coefficient(&self, label: &str) -> Option<i64> {
        let mut chars = label.chars();
        let (Some(c), None) = (chars.next(), chars.next()) else { return None };
        let i = (c as u32).checked_sub('a' as u32)? as usize;
        self.coefficients.get(i).copied()
    }

    pub fn holds(&self, g: &LabelledGraph) -> bool {
        g.labels().iter().map(|l| self.coefficient(l).unwrap_or(0)).sum::<i64>() >= 0
    }
}

/// One synchronous cancellation update of contribution `x`.
pub fn cancel_delta(x: i64, neighbours: impl IntoIterator<Item = (i64, u32)>, k: i64, e: i64) -> i64 {
    let mut low = 0i64;
    let mut high = 0i64;
    let mut below = 0i64;
    let mut above = 0i64;
    for (y, c) in neighbours {
        let c = c as i64;
        if y < -k {
            low += c;
        } else {
            above += c;
        }
        if y > k {
            high += c;
        } else {
            below += c;
        }
    }
    let next = if x > k {
        x - below
    } else if x < -k {
        x + above
    } else {
        x - low + high
    };
    next.clamp(-e, e)
}

/// The cancellation machine alone, over contributions `-E..E`. Labels are
/// parsed as initial contributions.
#[derive(Clone, Debug)]
pub struct CancelMachine {
    pub k: u32,
    pub e: i64,
}

impl Machine for CancelMachine {
    fn beta(&self) -> u32 {
        self.k
    }
    fn alphabet(&self) -> Vec<String> {
        (-self.e..=self.e).map(|x| x.to_string()).collect()
    }
    fn initial_state(&self, label: &str) -> Option<State> {
        label.parse::<i64>().ok().filter(|x| x.abs() <= self.e).map(State::int)
    }
    fn delta(&self, q: &State, n: &Neighbourhood) -> State {
        let Some(x) = q.as_int() else { return q.clone() };
        State::int(cancel_delta(x, n.iter().filter_map(|(s, c)| s.as_int().map(|y| (y, c))), self.k as i64, self.e))
    }
    fn is_accepting(&self, q: &State) -> bool {
        q.as_int().is_some_and(|x| x >= 0)
    }
    fn is_rejecting(&self, q: &State) -> bool {
        q.as_int().is_some_and(|x| x < 0)
    }
    fn states(&self) -> Option<Vec<State>> {
        Some((-self.e..=self.e).map(State::int).collect())
    }
}

fn with_role(x: i64, role: &str) -> State {
    State::pair(State::int(x), State::sym(role))
}

/// Contribution and role of a detect-level state.
fn role_of(q: &State) -> Option<(i64, &str)> {
    let (x, r) = product_parts(q)?;
    Some((x.as_int()?, r.as_sym()?))
}

fn is_leader_role(r: &str) -> bool {
    matches!(r, LEADER | DOUBLE | BOX_LEADER)
}

/// Cancellation extended by a role component plus the ⊥ and □ states.
#[derive(Clone, Debug)]
struct DetectBase {
    cancel: CancelMachine,
}

impl Machine for DetectBase {
    fn beta(&self) -> u32 {
        self.cancel.beta()
    }
    fn alphabet(&self) -> Vec<String> {
        Vec::new()
    }
    fn initial_state(&self, _label: &str) -> Option<State> {
        None
    }
    fn delta(&self, q: &State, n: &Neighbourhood) -> State {
        let Some((x, role)) = product_parts(q) else { return q.clone() };
        let inner = n.project(self.beta(), |s| product_parts(s).map(|p| p.0.clone()));
        State::pair(self.cancel.delta(x, &inner), role.clone())
    }
    fn is_accepting(&self, q: &State) -> bool {
        !q.is_sym(BOX)
    }
    fn is_rejecting(&self, q: &State) -> bool {
        q.is_sym(BOX)
    }
    fn states(&self) -> Option<Vec<State>> {
        let mut out: Vec<State> = [NONE, LEADER, DOUBLE, BOX_LEADER]
            .iter()
            .flat_map(|r| (-self.cancel.e..=self.cancel.e).map(move |x| with_role(x, r)))
            .collect();
        out.push(State::sym(BOT));
        out.push(State::sym(BOX));
        Some(out)
    }
}

/// Leaders check whether cancellation has converged.
#[derive(Clone, Debug)]
struct Detect {
    k: i64,
    e: i64,
}

impl DetectionRules for Detect {
    fn is_initiator(&self, q: &State) -> bool {
        role_of(q).is_some_and(|(_, r)| r == LEADER)
    }

    fn detect(&self, q: &State, support: &[State]) -> State {
        let Some((x, _)) = role_of(q) else { return q.clone() };
        if support.iter().any(|s| s.is_sym(BOX)) {
            return State::sym(BOT);
        }
        if support.iter().any(|s| s.is_sym(BOT)) {
            return with_role(x, NONE);
        }
        let within = |lo: i64, hi: i64| {
            support.iter().all(|s| role_of(s).is_some_and(|(y, r)| (r == NONE || r == LEADER) && lo <= y && y <= hi))
        };
        if within(-self.k, self.k) {
            with_role(x, DOUBLE)
        } else if within(-self.e, -1) {
            with_role(x, BOX_LEADER)
        } else {
            q.clone()
        }
    }
}

const DOUBLE_ID: ResponseId = 0;
const REJECT_ID: ResponseId = 1;

/// ⟨double⟩ and ⟨reject⟩, composed with the remembered detect state.
struct Convergence {
    l1: Arc<CompiledAbsenceDetection>,
    k: i64,
}

impl Convergence {
    fn detect_state<'a>(&self, s: &'a State) -> Option<&'a State> {
        match crate::compile::ad_view(current(s))? {
            crate::compile::AdView::Idle(q) if remembered(s) == current(s) => Some(q),
            _ => None,
        }
    }
}

impl BroadcastRules for Convergence {
    fn broadcast(&self, q: &State) -> Option<(State, ResponseId)> {
        let (x, r) = role_of(self.detect_state(q)?)?;
        match r {
            DOUBLE => Some((self.l1.lift(with_role(2 * x, LEADER)), DOUBLE_ID)),
            BOX_LEADER => Some((self.l1.lift(State::sym(BOX)), REJECT_ID)),
            _ => None,
        }
    }

    fn respond(&self, f: ResponseId, q: &State) -> State {
        let Some(last) = ad_payload(remembered(q)) else { return q.clone() };
        let next = match role_of(last) {
            Some((_, r)) if is_leader_role(r) => State::sym(BOT),
            Some((y, NONE)) if f == DOUBLE_ID && y.abs() <= self.k => with_role(2 * y, NONE),
            Some((y, NONE)) if f == REJECT_ID && y < 0 => State::sym(BOX),
            _ => last.clone(),
        };
        self.l1.lift(next)
    }

    fn response_ids(&self) -> Vec<ResponseId> {
        vec![DOUBLE_ID, REJECT_ID]
    }
}

/// Restarts from the initial contributions when some node is in ⊥.
struct Reset {
    l1: Arc<CompiledAbsenceDetection>,
    l3: Arc<CompiledWeakBroadcast>,
}

impl Reset {
    fn restart(&self, q0: &State, role: &str) -> State {
        let x = q0.as_int().unwrap_or(0);
        State::pair(self.l3.lift(self.l1.lift(with_role(x, role))), q0.clone())
    }
}

impl BroadcastRules for Reset {
    fn broadcast(&self, q: &State) -> Option<(State, ResponseId)> {
        let (s3, q0) = product_parts(q)?;
        let s1 = self.l3.base_state(s3)?;
        let d = self.l1.base_state(s1)?;
        d.is_sym(BOT).then(|| (self.restart(q0, LEADER), 0))
    }

    fn respond(&self, _f: ResponseId, q: &State) -> State {
        match product_parts(q) {
            Some((_, r0)) => self.restart(r0, NONE),
            None => q.clone(),
        }
    }

    fn response_ids(&self) -> Vec<ResponseId> {
        vec![0]
    }
}

/// The majority construction with every stage exposed.
#[derive(Clone)]
pub struct MajorityDaf {
    pub spec: ThresholdSpec,
    pub e: i64,
    pub cancel: Arc<CancelMachine>,
    pub detect: AbsenceDetectionMachine,
    pub l1: Arc<CompiledAbsenceDetection>,
    pub l2: WeakBroadcastMachine,
    pub l3: Arc<CompiledWeakBroadcast>,
    pub l4: WeakBroadcastMachine,
    pub l5: Arc<CompiledWeakBroadcast>,
    pub full: MachineRef,
}

pub fn majority_daf(spec: &ThresholdSpec) -> Result<MajorityDaf, MachineError> {
    let e = spec.bound();
    let k = spec.k as i64;
    let cancel = Arc::new(CancelMachine { k: spec.k, e });
    let detect = AbsenceDetectionMachine {
        base: Arc::new(DetectBase { cancel: (*cancel).clone() }),
        detections: Arc::new(Detect { k, e }),
    };
    let l1 = Arc::new(compile_absence_detection(&detect, spec.k as usize)?);
    let l2 = add_broadcasts(l1.clone(), Arc::new(Convergence { l1: l1.clone(), k }));
    let l3 = Arc::new(compile_weak_broadcast(&l2)?);
    let contributions: Vec<State> = (-e..=e).map(State::int).collect();
    let l4 = add_broadcasts(
        Arc::new(product_with(l3.clone(), contributions)),
        Arc::new(Reset { l1: l1.clone(), l3: l3.clone() }),
    );
    let l5 = Arc::new(compile_weak_broadcast(&l4)?);
    let init = {
        let (spec, l1, l3, l5) = (spec.clone(), l1.clone(), l3.clone(), l5.clone());
        move |label: &str| {
            let a = spec.coefficient(label)?;
            Some(l5.lift(State::pair(l3.lift(l1.lift(with_role(a, LEADER))), State::int(a))))
        }
    };
    let full = Customized::new(l5.clone())
        .with_init(spec.labels(), init)
        .with_acceptance(|s| !rejecting_full(s), rejecting_full);
    Ok(MajorityDaf { spec: spec.clone(), e, cancel, detect, l1, l2, l3, l4, l5, full: Arc::new(full) })
}

/// Detect-level state remembered through every wrapper.
fn remembered_detect(s: &State) -> Option<&State> {
    let (s3, _) = product_parts(wb_payload(remembered(s))?)?;
    ad_payload(remembered(wb_payload(remembered(s3))?))
}

fn rejecting_full(s: &State) -> bool {
    remembered_detect(s).is_some_and(|d| d.is_sym(BOX))
}

/// Role of a simulated node as seen by the leader invariants.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeaderRole {
    Follower,
    Leader,
    Bot,
    Rejected,
}

impl MajorityDaf {
    /// Detect-level state currently carried by a full-machine state.
    pub fn detect_state<'a>(&self, s: &'a State) -> Option<&'a State> {
        let (s3, _) = product_parts(wb_payload(current(s))?)?;
        ad_payload(current(wb_payload(current(s3))?))
    }

    pub fn role(&self, s: &State) -> Option<LeaderRole> {
        let d = self.detect_state(s)?;
        if d.is_sym(BOT) {
            return Some(LeaderRole::Bot);
        }
        if d.is_sym(BOX) {
            return Some(LeaderRole::Rejected);
        }
        let (_, r) = role_of(d)?;
        Some(if is_leader_role(r) { LeaderRole::Leader } else { LeaderRole::Follower })
    }

    /// Whether every node holds □ in its remembered state.
    pub fn all_rejected(&self, c: &[State]) -> bool {
        c.iter().all(rejecting_full)
    }

    /// Phase-0 form of a detect state at the first compiled level.
    pub fn lift_detect(&self, q: State) -> State {
        self.l1.lift(q)
    }
}
