//! The gated decision graph over the eight cues.
//!
//! Three belief variables are conjunctions over cue values:
//!
//! * others-to-user  = PAD ∧ IGD ∧ AUD  (someone close, looking at me, talking to me)
//! * user-to-others  = STAD ∧ UDSD ∧ OGD (turn-taking, me talking, me looking at them)
//! * user-busy       = SFD               (global veto on interrupting)
//!
//! From the beliefs, `interacting = others_to_user ∨ user_to_others` and
//! `intervene_ok = ¬interacting ∧ ¬user_busy`.
//!
//! [`evaluate`] drives a [`CueSource`] under one of three policies. EAGER asks
//! all eight cues. SHORT_CIRCUIT asks, in a fixed order, only cues that could
//! still change the outcome given what is already known; the remaining cues
//! are pinned to effective false, which provably cannot alter the decision.
//! HIERARCHICAL implements staged gating: environment-level filter cues first
//! (OSAD, PAD), then engagement cues (STAD, IGD), then directed-attention
//! cues (AUD, UDSD, OGD), with SFD always queried as the veto. Gated-off cues
//! take effective value false, so staged beliefs are conservative: they can
//! only under-report interaction relative to EAGER, never invent one.

use crate::cue::{Cue, CueMap, CueVector};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// The three belief variables combined from effective cue values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeliefState {
    pub others_to_user: bool,
    pub user_to_others: bool,
    pub user_busy: bool,
}

/// How cue queries are scheduled during evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GatePolicy {
    /// Query all eight cues unconditionally.
    Eager,
    /// Query in a fixed order, skipping cues that provably cannot change the
    /// decision given the values already known.
    ShortCircuit,
    /// Staged filters: OSAD/PAD gate their branches, STAD/IGD unlock the
    /// directed-attention stage, SFD is always queried.
    Hierarchical,
}

impl GatePolicy {
    pub const ALL: [GatePolicy; 3] = [
        GatePolicy::Eager,
        GatePolicy::ShortCircuit,
        GatePolicy::Hierarchical,
    ];
}

impl fmt::Display for GatePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GatePolicy::Eager => "EAGER",
            GatePolicy::ShortCircuit => "SHORT_CIRCUIT",
            GatePolicy::Hierarchical => "HIERARCHICAL",
        })
    }
}

impl FromStr for GatePolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "EAGER" => Ok(GatePolicy::Eager),
            "SHORT_CIRCUIT" => Ok(GatePolicy::ShortCircuit),
            "HIERARCHICAL" => Ok(GatePolicy::Hierarchical),
            _ => Err(Error::validation(format!(
                "unknown gate policy {s:?} (expected EAGER, SHORT_CIRCUIT, or HIERARCHICAL)"
            ))),
        }
    }
}

/// Why a trace step has its effective value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StepReason {
    /// The cue source was asked and answered.
    Queried,
    /// A closed gate defaulted the cue to false without querying.
    GatedDefaultFalse,
    /// The cue could not change the decision, so it was skipped (pinned false).
    SkippedIrrelevant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub cue: Cue,
    pub queried: bool,
    pub effective_value: bool,
    pub reason: StepReason,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTransition {
    pub stage: String,
    pub outcome: String,
}

/// Step-by-step account of one evaluation: every cue appears exactly once,
/// in the order the policy considered it.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvalTrace {
    pub steps: Vec<TraceStep>,
    pub stage_transitions: Vec<StageTransition>,
}

impl EvalTrace {
    /// Number of cues actually asked of the source.
    pub fn queries_issued(&self) -> usize {
        self.steps.iter().filter(|s| s.queried).count()
    }

    /// Effective cue values, once all eight steps are present.
    pub fn effective(&self) -> Option<CueVector> {
        if self.steps.len() != 8 {
            return None;
        }
        let mut v = CueVector::default();
        for s in &self.steps {
            v.set(s.cue, s.effective_value);
        }
        Some(v)
    }
}

/// The outcome of evaluating one segment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub segment_id: String,
    pub beliefs: BeliefState,
    pub interacting: bool,
    pub intervene_ok: bool,
    pub trace: EvalTrace,
}

/// Answers cue queries; may be backed by labels, a simulator, or a model.
pub trait CueSource {
    fn query(&mut self, cue: Cue) -> Result<bool>;
}

impl<F: FnMut(Cue) -> Result<bool>> CueSource for F {
    fn query(&mut self, cue: Cue) -> Result<bool> {
        self(cue)
    }
}

/// The three belief conjunctions over effective cue values.
pub fn combine_beliefs(effective: &CueVector) -> BeliefState {
    BeliefState {
        others_to_user: effective.pad && effective.igd && effective.aud,
        user_to_others: effective.stad && effective.udsd && effective.ogd,
        user_busy: effective.sfd,
    }
}

/// Final verdicts from the beliefs: `(interacting, intervene_ok)`.
pub fn decide(beliefs: &BeliefState) -> (bool, bool) {
    let interacting = beliefs.others_to_user || beliefs.user_to_others;
    let intervene_ok = !interacting && !beliefs.user_busy;
    (interacting, intervene_ok)
}

fn verdicts(effective: &CueVector) -> (bool, bool) {
    decide(&combine_beliefs(effective))
}

/// Fixed query order for SHORT_CIRCUIT: cheap filter cues first.
const SHORT_CIRCUIT_ORDER: [Cue; 8] = [
    Cue::Osad,
    Cue::Pad,
    Cue::Stad,
    Cue::Igd,
    Cue::Aud,
    Cue::Udsd,
    Cue::Ogd,
    Cue::Sfd,
];

/// True iff some completion of the unknown cues lets `cue`'s value change the
/// decision. `known` holds queried values and pinned skips; everything `None`
/// is quantified over (at most 2^7 completions, so the check is exhaustive).
fn can_affect_decision(cue: Cue, known: &CueMap<Option<bool>>) -> bool {
    let unknown: Vec<Cue> = Cue::ALL
        .iter()
        .copied()
        .filter(|c| *c != cue && known.get(*c).is_none())
        .collect();
    for mask in 0u32..1 << unknown.len() {
        let mut v = CueVector::from_fn(|c| known.get(c).unwrap_or(false));
        for (i, &u) in unknown.iter().enumerate() {
            v.set(u, mask >> i & 1 == 1);
        }
        v.set(cue, false);
        let low = verdicts(&v);
        v.set(cue, true);
        if verdicts(&v) != low {
            return true;
        }
    }
    false
}

/// Evaluate one segment by querying `source` under `policy`.
///
/// Query failures surface as [`Error::CueQuery`] with the failing cue and the
/// partial trace attached.
pub fn evaluate(
    segment_id: &str,
    source: &mut dyn CueSource,
    policy: GatePolicy,
) -> Result<Decision> {
    let mut trace = EvalTrace::default();
    let result = match policy {
        GatePolicy::Eager => evaluate_eager(source, &mut trace),
        GatePolicy::ShortCircuit => evaluate_short_circuit(source, &mut trace),
        GatePolicy::Hierarchical => evaluate_hierarchical(source, &mut trace),
    };
    match result {
        Ok(effective) => {
            let beliefs = combine_beliefs(&effective);
            let (interacting, intervene_ok) = decide(&beliefs);
            Ok(Decision {
                segment_id: segment_id.to_string(),
                beliefs,
                interacting,
                intervene_ok,
                trace,
            })
        }
        Err((cue, source_err)) => Err(Error::CueQuery {
            segment_id: segment_id.to_string(),
            cue,
            source: Box::new(source_err),
            trace: Box::new(trace),
        }),
    }
}

type StepResult = std::result::Result<CueVector, (Cue, Error)>;

fn query_step(
    source: &mut dyn CueSource,
    trace: &mut EvalTrace,
    cue: Cue,
) -> std::result::Result<bool, (Cue, Error)> {
    let value = source.query(cue).map_err(|e| (cue, e))?;
    trace.steps.push(TraceStep {
        cue,
        queried: true,
        effective_value: value,
        reason: StepReason::Queried,
    });
    Ok(value)
}

fn silent_step(trace: &mut EvalTrace, cue: Cue, reason: StepReason) {
    trace.steps.push(TraceStep {
        cue,
        queried: false,
        effective_value: false,
        reason,
    });
}

fn evaluate_eager(source: &mut dyn CueSource, trace: &mut EvalTrace) -> StepResult {
    let mut effective = CueVector::default();
    for cue in Cue::ALL {
        let v = query_step(source, trace, cue)?;
        effective.set(cue, v);
    }
    Ok(effective)
}

fn evaluate_short_circuit(source: &mut dyn CueSource, trace: &mut EvalTrace) -> StepResult {
    let mut known: CueMap<Option<bool>> = CueMap::default();
    for cue in SHORT_CIRCUIT_ORDER {
        if can_affect_decision(cue, &known) {
            let v = query_step(source, trace, cue)?;
            known.set(cue, Some(v));
        } else {
            silent_step(trace, cue, StepReason::SkippedIrrelevant);
            known.set(cue, Some(false));
        }
    }
    Ok(CueVector::from_fn(|c| known.get(c).unwrap()))
}

fn evaluate_hierarchical(source: &mut dyn CueSource, trace: &mut EvalTrace) -> StepResult {
    let mut effective = CueVector::default();

    // Stage 1: environment filters. OSAD gates the audio branch, PAD the
    // visual branch.
    let osad = query_step(source, trace, Cue::Osad)?;
    let pad = query_step(source, trace, Cue::Pad)?;
    effective.set(Cue::Osad, osad);
    effective.set(Cue::Pad, pad);
    trace.stage_transitions.push(StageTransition {
        stage: "environment".into(),
        outcome: format!("osad={osad} pad={pad}"),
    });

    // Stage 2: engagement cues that survive their branch gate.
    let stad = if osad {
        query_step(source, trace, Cue::Stad)?
    } else {
        silent_step(trace, Cue::Stad, StepReason::GatedDefaultFalse);
        false
    };
    let igd = if pad {
        query_step(source, trace, Cue::Igd)?
    } else {
        silent_step(trace, Cue::Igd, StepReason::GatedDefaultFalse);
        false
    };
    effective.set(Cue::Stad, stad);
    effective.set(Cue::Igd, igd);
    let unlocked = stad || igd;
    trace.stage_transitions.push(StageTransition {
        stage: "engagement".into(),
        outcome: if unlocked { "unlocked" } else { "locked" }.into(),
    });

    // Stage 3: directed attention, only while the branch gate is open and
    // stage 2 unlocked a possible interaction.
    let mut queried_stage3 = 0usize;
    for (cue, branch_open) in [(Cue::Aud, osad), (Cue::Udsd, osad), (Cue::Ogd, pad)] {
        let value = if branch_open && unlocked {
            queried_stage3 += 1;
            query_step(source, trace, cue)?
        } else {
            silent_step(trace, cue, StepReason::GatedDefaultFalse);
            false
        };
        effective.set(cue, value);
    }
    trace.stage_transitions.push(StageTransition {
        stage: "directed".into(),
        outcome: format!("queried {queried_stage3} cues"),
    });

    // SFD is the global veto and bypasses every gate.
    let sfd = query_step(source, trace, Cue::Sfd)?;
    effective.set(Cue::Sfd, sfd);
    trace.stage_transitions.push(StageTransition {
        stage: "focus".into(),
        outcome: if sfd { "busy" } else { "clear" }.into(),
    });

    Ok(effective)
}

/// Number of cue queries [`evaluate`] would issue for these underlying
/// values under `policy`.
pub fn query_count(policy: GatePolicy, cues: &CueVector) -> usize {
    let mut source = |c: Cue| Ok(*cues.get(c));
    evaluate("query-count", &mut source, policy)
        .expect("infallible source")
        .trace
        .queries_issued()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn answers(cues: CueVector) -> impl FnMut(Cue) -> Result<bool> {
        move |c| Ok(*cues.get(c))
    }

    fn run(cues: CueVector, policy: GatePolicy) -> Decision {
        evaluate("s", &mut answers(cues), policy).unwrap()
    }

    #[test]
    fn beliefs_match_the_three_conjunctions() {
        let mut v = CueVector::default();
        v.pad = true;
        v.igd = true;
        v.aud = true;
        let b = combine_beliefs(&v);
        assert!(b.others_to_user && !b.user_to_others && !b.user_busy);

        let mut v = CueVector::default();
        v.stad = true;
        v.udsd = true;
        v.ogd = true;
        let b = combine_beliefs(&v);
        assert!(!b.others_to_user && b.user_to_others && !b.user_busy);

        let mut v = CueVector::default();
        v.sfd = true;
        let b = combine_beliefs(&v);
        assert_eq!((b.others_to_user, b.user_to_others, b.user_busy), (false, false, true));
    }

    #[test]
    fn decide_rules() {
        let d = |o, u, b| {
            decide(&BeliefState {
                others_to_user: o,
                user_to_others: u,
                user_busy: b,
            })
        };
        assert_eq!(d(true, false, false), (true, false));
        assert_eq!(d(false, false, false), (false, true));
        assert_eq!(d(false, false, true), (false, false));
    }

    #[test]
    fn all_true_under_every_policy() {
        for policy in GatePolicy::ALL {
            let d = run(CueVector::from_bits(0xff), policy);
            assert!(d.interacting, "{policy}");
            assert!(!d.intervene_ok, "{policy}");
        }
        // Short-circuit may leave OGD unqueried once the verdict is forced,
        // so only the exhaustive policies pin down both beliefs.
        for policy in [GatePolicy::Eager, GatePolicy::Hierarchical] {
            let d = run(CueVector::from_bits(0xff), policy);
            assert!(d.beliefs.others_to_user, "{policy}");
            assert!(d.beliefs.user_to_others, "{policy}");
        }
    }

    #[test]
    fn hierarchical_all_false_queries_only_the_filters_and_veto() {
        let d = run(CueVector::default(), GatePolicy::Hierarchical);
        let queried: Vec<Cue> = d
            .trace
            .steps
            .iter()
            .filter(|s| s.queried)
            .map(|s| s.cue)
            .collect();
        assert_eq!(queried, [Cue::Osad, Cue::Pad, Cue::Sfd]);
        assert!(!d.interacting);
        assert!(d.intervene_ok);
    }

    #[test]
    fn hierarchical_locked_engagement_skips_directed_stage() {
        // OSAD and PAD open, but neither STAD nor IGD fires; SFD vetoes.
        let mut v = CueVector::default();
        v.osad = true;
        v.pad = true;
        v.sfd = true;
        let d = run(v, GatePolicy::Hierarchical);
        for s in &d.trace.steps {
            match s.cue {
                Cue::Aud | Cue::Udsd | Cue::Ogd => {
                    assert!(!s.queried);
                    assert_eq!(s.reason, StepReason::GatedDefaultFalse);
                }
                _ => assert!(s.queried),
            }
        }
        assert!(!d.interacting);
        assert!(!d.intervene_ok);
    }

    #[test]
    fn short_circuit_matches_eager_on_every_assignment() {
        for bits in 0..=255u8 {
            let v = CueVector::from_bits(bits);
            let eager = run(v, GatePolicy::Eager);
            let sc = run(v, GatePolicy::ShortCircuit);
            assert_eq!(
                (sc.interacting, sc.intervene_ok),
                (eager.interacting, eager.intervene_ok),
                "bits {bits:08b}"
            );
        }
    }

    #[test]
    fn hierarchical_never_invents_interaction() {
        for bits in 0..=255u8 {
            let v = CueVector::from_bits(bits);
            let eager = run(v, GatePolicy::Eager);
            let hier = run(v, GatePolicy::Hierarchical);
            if hier.interacting {
                assert!(eager.interacting, "bits {bits:08b}");
            }
        }
    }

    #[test]
    fn policies_agree_when_no_gate_closes() {
        for bits in 0..=255u8 {
            let v = CueVector::from_bits(bits);
            if !(v.osad && v.pad && (v.stad || v.igd)) {
                continue;
            }
            let eager = run(v, GatePolicy::Eager);
            let hier = run(v, GatePolicy::Hierarchical);
            assert_eq!(
                (hier.interacting, hier.intervene_ok),
                (eager.interacting, eager.intervene_ok),
                "bits {bits:08b}"
            );
        }
    }

    #[test]
    fn query_count_bounds() {
        for bits in 0..=255u8 {
            let v = CueVector::from_bits(bits);
            assert_eq!(query_count(GatePolicy::Eager, &v), 8);
            let sc = query_count(GatePolicy::ShortCircuit, &v);
            assert!(sc <= 8, "short-circuit asked {sc}");
            let h = query_count(GatePolicy::Hierarchical, &v);
            assert!((3..=8).contains(&h), "hierarchical asked {h}");
        }
        assert_eq!(query_count(GatePolicy::Hierarchical, &CueVector::default()), 3);
        assert_eq!(query_count(GatePolicy::Hierarchical, &CueVector::from_bits(0xff)), 8);
    }

    #[test]
    fn traces_cover_every_cue_exactly_once() {
        for policy in GatePolicy::ALL {
            for bits in [0u8, 0x0f, 0xf0, 0xff, 0b1010_0101] {
                let d = run(CueVector::from_bits(bits), policy);
                assert_eq!(d.trace.steps.len(), 8);
                let mut seen = std::collections::HashSet::new();
                for s in &d.trace.steps {
                    assert!(seen.insert(s.cue));
                    if !s.queried {
                        assert_ne!(s.reason, StepReason::Queried);
                    }
                }
                // Decision invariants.
                let (i, ok) = decide(&d.beliefs);
                assert_eq!((d.interacting, d.intervene_ok), (i, ok));
            }
        }
    }

    #[test]
    fn evaluation_is_deterministic() {
        let v = CueVector::from_bits(0b1100_1010);
        for policy in GatePolicy::ALL {
            assert_eq!(run(v, policy), run(v, policy));
        }
    }

    #[test]
    fn source_failure_carries_cue_and_partial_trace() {
        let mut flaky = |c: Cue| {
            if c == Cue::Aud {
                Err(Error::validation("detector offline"))
            } else {
                Ok(true)
            }
        };
        let err = evaluate("seg-9", &mut flaky, GatePolicy::Eager).unwrap_err();
        match err {
            Error::CueQuery {
                segment_id,
                cue,
                trace,
                ..
            } => {
                assert_eq!(segment_id, "seg-9");
                assert_eq!(cue, Cue::Aud);
                // OSAD and STAD were answered before AUD failed.
                assert_eq!(trace.steps.len(), 2);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn effective_values_reconstruct_from_trace() {
        let v = CueVector::from_bits(0b0110_0110);
        for policy in GatePolicy::ALL {
            let d = run(v, policy);
            let eff = d.trace.effective().unwrap();
            assert_eq!(combine_beliefs(&eff), d.beliefs);
        }
    }
}
