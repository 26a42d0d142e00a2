//! Evaluation metrics: joint goal accuracy, per-class gate F1, and the
//! per-domain / per-turn / per-slot breakdowns.
//!
//! Joint goal accuracy is the ratio of turns whose predicted state is
//! entirely consistent with gold — exact set equality over triplets, values
//! compared as lowercased token lists. Domain-specific accuracy compares
//! the two states restricted to that domain's slots, over all turns, so a
//! single-domain corpus reproduces the overall number. All reductions are
//! counts, hence associative and order-independent.

use std::collections::BTreeMap;

use csfn_core::gate::GateClass;
use csfn_core::schema::SchemaGraph;
use csfn_core::state::DialogueState;
use serde::Serialize;

use crate::error::{AppError, Result};

/// Everything recorded about one evaluated turn.
#[derive(Debug, Clone)]
pub struct TurnRecord {
    pub dialogue_id: String,
    /// 1-based turn index within the dialogue.
    pub turn_index: usize,
    pub predicted: DialogueState,
    pub gold: DialogueState,
    pub predicted_gates: Vec<GateClass>,
    pub gold_gates: Vec<GateClass>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassF1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnBucket {
    pub turn: usize,
    pub count: usize,
    pub proportion: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub oracle_mode: String,
    pub ablation: String,
    pub split: String,
    pub dialogue_count: usize,
    pub turn_count: usize,
    pub joint_goal_accuracy: f64,
    pub per_domain_joint_accuracy: BTreeMap<String, f64>,
    pub per_turn: Vec<TurnBucket>,
    pub gate_f1: BTreeMap<String, ClassF1>,
    pub per_slot_f1: BTreeMap<String, ClassF1>,
    /// PTR decisions whose decode came back empty (slot omitted).
    pub empty_value_omissions: usize,
}

/// Exact-match joint goal accuracy over aligned turn lists.
pub fn joint_goal_accuracy(pred: &[DialogueState], gold: &[DialogueState]) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(AppError::data(format!(
            "joint accuracy over misaligned lists: {} vs {}",
            pred.len(),
            gold.len()
        )));
    }
    if pred.is_empty() {
        return Ok(1.0);
    }
    let hits = pred.iter().zip(gold.iter()).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / pred.len() as f64)
}

fn restrict_to_domain(state: &DialogueState, domain: &str) -> DialogueState {
    let mut out = DialogueState::new();
    for (d, s, v) in state.iter() {
        if d == domain {
            out.insert(d, s, v.to_vec()).expect("existing triplet is valid");
        }
    }
    out
}

/// One-vs-rest F1 over all (turn, pair) gate decisions.
pub fn gate_f1(records: &[TurnRecord]) -> BTreeMap<String, ClassF1> {
    let classes = [GateClass::None, GateClass::DontCare, GateClass::Ptr];
    let mut out = BTreeMap::new();
    for &class in &classes {
        let (mut tp, mut fp, mut fn_, mut support) = (0usize, 0usize, 0usize, 0usize);
        for rec in records {
            for (&p, &g) in rec.predicted_gates.iter().zip(rec.gold_gates.iter()) {
                if g == class {
                    support += 1;
                }
                match (p == class, g == class) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => {}
                }
            }
        }
        out.insert(class.name().to_string(), prf(tp, fp, fn_, support));
    }
    out
}

fn prf(tp: usize, fp: usize, fn_: usize, support: usize) -> ClassF1 {
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassF1 {
        precision,
        recall,
        f1,
        support,
    }
}

/// Joint accuracy restricted to each domain's slots, per-turn-index
/// accuracy with proportions, and per-pair (slot, value) detection F1.
pub fn breakdown_reports(
    records: &[TurnRecord],
    schema: &SchemaGraph,
) -> (BTreeMap<String, f64>, Vec<TurnBucket>, BTreeMap<String, ClassF1>) {
    let mut per_domain = BTreeMap::new();
    for domain in schema.domains() {
        let hits = records
            .iter()
            .filter(|r| restrict_to_domain(&r.predicted, domain) == restrict_to_domain(&r.gold, domain))
            .count();
        let acc = if records.is_empty() { 1.0 } else { hits as f64 / records.len() as f64 };
        per_domain.insert(domain.clone(), acc);
    }

    let mut buckets: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for r in records {
        let entry = buckets.entry(r.turn_index).or_default();
        entry.0 += 1;
        if r.predicted == r.gold {
            entry.1 += 1;
        }
    }
    let total = records.len().max(1);
    let per_turn = buckets
        .into_iter()
        .map(|(turn, (count, hits))| TurnBucket {
            turn,
            count,
            proportion: count as f64 / total as f64,
            accuracy: hits as f64 / count as f64,
        })
        .collect();

    let mut per_slot = BTreeMap::new();
    for (domain, slot) in schema.domain_slot_pairs() {
        let (mut tp, mut fp, mut fn_, mut support) = (0usize, 0usize, 0usize, 0usize);
        for r in records {
            let p = r.predicted.get(domain, slot);
            let g = r.gold.get(domain, slot);
            if g.is_some() {
                support += 1;
            }
            match (p, g) {
                (Some(pv), Some(gv)) if pv == gv => tp += 1,
                (Some(_), Some(_)) => {
                    fp += 1;
                    fn_ += 1;
                }
                (Some(_), None) => fp += 1,
                (None, Some(_)) => fn_ += 1,
                (None, None) => {}
            }
        }
        per_slot.insert(format!("{domain}-{slot}"), prf(tp, fp, fn_, support));
    }
    (per_domain, per_turn, per_slot)
}

/// Assemble the full report from per-turn records.
pub fn build_report(
    records: &[TurnRecord],
    schema: &SchemaGraph,
    oracle_mode: &str,
    ablation: &str,
    split: &str,
    dialogue_count: usize,
    empty_value_omissions: usize,
) -> Result<EvalReport> {
    let pred: Vec<DialogueState> = records.iter().map(|r| r.predicted.clone()).collect();
    let gold: Vec<DialogueState> = records.iter().map(|r| r.gold.clone()).collect();
    let joint = joint_goal_accuracy(&pred, &gold)?;
    let (per_domain, per_turn, per_slot) = breakdown_reports(records, schema);
    Ok(EvalReport {
        oracle_mode: oracle_mode.to_string(),
        ablation: ablation.to_string(),
        split: split.to_string(),
        dialogue_count,
        turn_count: records.len(),
        joint_goal_accuracy: joint,
        per_domain_joint_accuracy: per_domain,
        per_turn,
        gate_f1: gate_f1(records),
        per_slot_f1: per_slot,
        empty_value_omissions,
    })
}
