use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::metrics::{
    legality_metrics, move_matching, resignation_rates, time_correlation, time_pairs, value_reliability,
    LegalityStratum, MoveMatching, PositionEval, Proportion, ResignationReport, TimeReport, ValueBucket,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub move_matching: MoveMatching,
    pub legality: Vec<LegalityStratum>,
    /// `None` when no position has a recorded think time or a series is
    /// constant.
    pub time: Option<TimeReport>,
    pub resignation: ResignationReport,
    pub value: Vec<ValueBucket>,
}

/// All offline metrics over evaluated positions (human and random games
/// may be mixed; each metric picks its own rows).
pub fn metric_report(evals: &[PositionEval]) -> MetricReport {
    let human: Vec<PositionEval> = evals.iter().filter(|e| e.source == super::Source::Human).cloned().collect();
    MetricReport {
        move_matching: move_matching(&human),
        legality: legality_metrics(evals),
        time: time_correlation(&time_pairs(&human)).ok(),
        resignation: resignation_rates(&human),
        value: value_reliability(&human),
    }
}

fn row(out: &mut String, section: &str, key: &str, p: &Proportion) {
    let _ = writeln!(out, "{section},{key},{:.6},{},{:.6}", p.p, p.n, p.ci95);
}

impl MetricReport {
    /// Long-format table: `section,key,value,n,ci95`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("section,key,value,n,ci95\n");
        let mm = &self.move_matching;
        row(&mut out, "accuracy", "overall", &mm.overall);
        for (k, p) in &mm.by_category {
            row(&mut out, "accuracy_category", k, p);
        }
        for (k, p) in &mm.by_elo {
            row(&mut out, "accuracy_elo", &k.to_string(), p);
        }
        for (i, p) in mm.by_progress.iter().enumerate() {
            row(&mut out, "accuracy_progress", &i.to_string(), p);
        }
        for s in &self.legality {
            let key = format!("{}{}", serde_json::to_value(s.source).unwrap().as_str().unwrap_or(""), if s.in_check_only { "_check" } else { "" });
            row(&mut out, "top1_valid", &key, &s.top1_valid);
            let _ = writeln!(out, "invalid_mass,{key},{:.6},{},", s.invalid_mass, s.positions);
        }
        if let Some(t) = &self.time {
            let _ = writeln!(out, "time,pearson_r,{:.6},{},", t.r, t.n);
            for b in &t.buckets {
                let key = format!("{}-{}", b.lo, b.hi);
                let _ = writeln!(out, "time_median,{key},{:.6},{},", b.median, b.n);
                let _ = writeln!(out, "time_q25,{key},{:.6},{},", b.q25, b.n);
                let _ = writeln!(out, "time_q75,{key},{:.6},{},", b.q75, b.n);
            }
        }
        let r = &self.resignation;
        let _ = writeln!(out, "resignation,tpr,{:.6},{},", r.tpr, r.positives);
        let _ = writeln!(out, "resignation,fpr,{:.6},{},", r.fpr, r.negatives);
        for b in &self.value {
            let v = b.r.map(|r| format!("{r:.6}")).unwrap_or_default();
            let _ = writeln!(out, "value_r,{},{v},{},", b.bucket, b.n);
        }
        out
    }
}
