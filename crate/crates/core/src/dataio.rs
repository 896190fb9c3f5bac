//! Competing-risks records, CSV ingestion and the Kaplan–Meier estimator.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt::fmt_sig;

/// Observed outcome of a unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cause {
    Mode1,
    Mode2,
    Tie,
    Censored,
}

impl Cause {
    /// Indicator triple `(delta0, delta1, delta2)`; all zero means censored.
    pub fn indicators(self) -> (u8, u8, u8) {
        match self {
            Cause::Tie => (1, 0, 0),
            Cause::Mode1 => (0, 1, 0),
            Cause::Mode2 => (0, 0, 1),
            Cause::Censored => (0, 0, 0),
        }
    }

    pub fn is_failure(self) -> bool {
        self != Cause::Censored
    }

    pub fn label(self) -> &'static str {
        match self {
            Cause::Mode1 => "1",
            Cause::Mode2 => "2",
            Cause::Tie => "tie",
            Cause::Censored => "censored",
        }
    }
}

impl fmt::Display for Cause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Cause {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" => Ok(Cause::Mode1),
            "2" => Ok(Cause::Mode2),
            "tie" => Ok(Cause::Tie),
            "censored" => Ok(Cause::Censored),
            other => Err(format!(
                "unknown cause label {other:?} (expected 1, 2, tie or censored)"
            )),
        }
    }
}

/// One unit: observed lifetime or censoring time, and its outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    time: f64,
    cause: Cause,
}

impl Record {
    pub fn new(time: f64, cause: Cause) -> Result<Self> {
        if !(time.is_finite() && time > 0.0) {
            return Err(Error::Domain(format!("record time must be positive and finite, got {time}")));
        }
        Ok(Self { time, cause })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn cause(&self) -> Cause {
        self.cause
    }
}

/// Counts of each outcome.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub m0: usize,
    pub m1: usize,
    pub m2: usize,
    pub n_censored: usize,
    pub n: usize,
}

impl Summary {
    pub fn failures(&self) -> usize {
        self.m0 + self.m1 + self.m2
    }
}

/// Immutable, non-empty collection of records in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<Record>,
    summary: Summary,
}

impl Dataset {
    pub fn new(records: Vec<Record>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut s = Summary {
            n: records.len(),
            ..Summary::default()
        };
        for r in &records {
            match r.cause {
                Cause::Tie => s.m0 += 1,
                Cause::Mode1 => s.m1 += 1,
                Cause::Mode2 => s.m2 += 1,
                Cause::Censored => s.n_censored += 1,
            }
        }
        Ok(Self { records, summary: s })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn summary(&self) -> Summary {
        self.summary
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Copy with every time divided by `scale`.
    pub fn rescaled(&self, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Config(format!("time scale must be positive, got {scale}")));
        }
        let records = self
            .records
            .iter()
            .map(|r| Record::new(r.time / scale, r.cause))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(records)
    }

    /// Writes the `time,cause` CSV form.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "time,cause")?;
        for r in &self.records {
            writeln!(out, "{},{}", fmt_sig(r.time), r.cause)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}

/// Parses a `time,cause` CSV. Lines starting with `#` are comments.
pub fn parse_csv<R: Read>(source: R) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(source);
    let headers = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
    let names: Vec<String> = headers.iter().map(|h| h.to_ascii_lowercase()).collect();
    if names != ["time", "cause"] {
        return Err(Error::Parse {
            line: headers.position().map_or(1, |p| p.line() as usize),
            message: format!("expected header `time,cause`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(e, 0))?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, found {}", row.len()),
            });
        }
        let time: f64 = row[0].parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid time {:?}", &row[0]),
        })?;
        if !(time.is_finite() && time > 0.0) {
            return Err(Error::Parse {
                line,
                message: format!("time must be positive and finite, got {time}"),
            });
        }
        let cause: Cause = row[1].parse().map_err(|message| Error::Parse { line, message })?;
        records.push(Record { time, cause });
    }
    Dataset::new(records)
}

fn csv_error(e: csv::Error, fallback_line: usize) -> Error {
    let line = e.position().map_or(fallback_line, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}

/// Right-continuous, non-increasing step function starting at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    jump_times: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at `t`; 1 left of the first jump.
    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.jump_times.partition_point(|&j| j <= t);
        if idx == 0 {
            1.0
        } else {
            self.values[idx - 1]
        }
    }

    /// Two-column `t,survival` CSV, one row per step.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,survival")?;
        writeln!(out, "0,1")?;
        for (t, s) in self.jump_times.iter().zip(&self.values) {
            writeln!(out, "{},{}", fmt_sig(*t), fmt_sig(*s))?;
        }
        Ok(())
    }
}

/// Product-limit estimate of the survival of the first failure, ignoring
/// the failure mode. Failures at a time precede censorings at that time.
pub fn kaplan_meier(data: &Dataset) -> StepFunction {
    let mut rows: Vec<(f64, bool)> = data
        .records
        .iter()
        .map(|r| (r.time, r.cause.is_failure()))
        .collect();
    // failures sort ahead of censorings at equal times
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    let mut at_risk = rows.len();
    let mut surv = 1.0;
    let mut jump_times = Vec::new();
    let mut values = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        let t = rows[i].0;
        let mut deaths = 0;
        let mut removed = 0;
        while i < rows.len() && rows[i].0 == t {
            if rows[i].1 {
                deaths += 1;
            }
            removed += 1;
            i += 1;
        }
        if deaths > 0 {
            surv *= 1.0 - deaths as f64 / at_risk as f64;
            jump_times.push(t);
            values.push(surv);
        }
        at_risk -= removed;
    }
    StepFunction { jump_times, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_basic_file() {
        let d = parse_csv("time,cause\n275,1\n300,censored".as_bytes()).unwrap();
        let s = d.summary();
        assert_eq!((s.n, s.m1, s.n_censored, s.m0, s.m2), (2, 1, 1, 0, 0));
        let d = parse_csv("time,cause\n1.5,tie\n".as_bytes()).unwrap();
        assert_eq!(d.summary().m0, 1);
    }

    #[test]
    fn accepts_comments_and_case() {
        let src = "# device data\ntime,cause\n# units: kilocycles\n10,TIE\n20 , Censored\n30,2\n";
        let d = parse_csv(src.as_bytes()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.records()[1].cause(), Cause::Censored);
        assert_eq!(d.records()[2].cause(), Cause::Mode2);
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_csv("time,cause\n1,1\n-2,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_csv("time,cause\n1,1\n2,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_csv("time,cause\nabc,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_csv("t,c\n1,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn rejects_empty_dataset() {
        assert!(matches!(parse_csv("time,cause\n".as_bytes()), Err(Error::EmptyDataset)));
        assert!(matches!(Dataset::new(vec![]), Err(Error::EmptyDataset)));
    }

    #[test]
    fn indicators_encode_one_state() {
        for c in [Cause::Mode1, Cause::Mode2, Cause::Tie, Cause::Censored] {
            let (d0, d1, d2) = c.indicators();
            assert!(d0 + d1 + d2 <= 1);
            assert_eq!(d0 + d1 + d2 == 0, c == Cause::Censored);
        }
    }

    fn ds(rows: &[(f64, Cause)]) -> Dataset {
        Dataset::new(rows.iter().map(|&(t, c)| Record::new(t, c).unwrap()).collect()).unwrap()
    }

    #[test]
    fn km_without_censoring() {
        let d = ds(&[(3.0, Cause::Mode1), (1.0, Cause::Mode2), (2.0, Cause::Tie), (4.0, Cause::Mode1)]);
        let km = kaplan_meier(&d);
        assert_eq!(km.jump_times(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(km.values(), &[0.75, 0.5, 0.25, 0.0]);
        assert_eq!(km.eval(0.5), 1.0);
        assert_eq!(km.eval(2.0), 0.5);
        assert_eq!(km.eval(2.5), 0.5);
    }

    #[test]
    fn km_single_censored_record() {
        let km = kaplan_meier(&ds(&[(5.0, Cause::Censored)]));
        assert!(km.jump_times().is_empty());
        assert_eq!(km.eval(100.0), 1.0);
    }

    #[test]
    fn km_hand_example() {
        let km = kaplan_meier(&ds(&[(1.0, Cause::Mode1), (2.0, Cause::Censored), (3.0, Cause::Mode2)]));
        assert!((km.eval(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((km.eval(2.9) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(km.eval(3.0), 0.0);
    }

    #[test]
    fn km_failures_precede_censorings() {
        let km = kaplan_meier(&ds(&[(2.0, Cause::Censored), (2.0, Cause::Mode1), (5.0, Cause::Mode1)]));
        // at t=2 both units are at risk, one fails
        assert!((km.eval(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(km.eval(5.0), 0.0);
    }

    fn cause_strategy() -> impl Strategy<Value = Cause> {
        prop_oneof![
            Just(Cause::Mode1),
            Just(Cause::Mode2),
            Just(Cause::Tie),
            Just(Cause::Censored)
        ]
    }

    proptest! {
        #[test]
        fn csv_round_trip(rows in prop::collection::vec((1u32..10_000_000, cause_strategy()), 1..60)) {
            let records: Vec<Record> = rows
                .iter()
                .map(|&(k, c)| Record::new(k as f64 / 1000.0, c).unwrap())
                .collect();
            let d = Dataset::new(records).unwrap();
            let back = parse_csv(d.to_csv_string().as_bytes()).unwrap();
            prop_assert_eq!(back, d);
        }

        #[test]
        fn summary_counts_add_up(rows in prop::collection::vec((1u32..1000, cause_strategy()), 1..80)) {
            let d = ds(&rows.iter().map(|&(k, c)| (k as f64, c)).collect::<Vec<_>>());
            let s = d.summary();
            prop_assert_eq!(s.m0 + s.m1 + s.m2 + s.n_censored, s.n);
        }

        #[test]
        fn km_matches_empirical_survival_without_censoring(times in prop::collection::vec(1u32..500, 1..50)) {
            let d = ds(&times.iter().map(|&k| (k as f64, Cause::Mode1)).collect::<Vec<_>>());
            let km = kaplan_meier(&d);
            let n = times.len() as f64;
            let mut prev = 1.0;
            for probe in 0..510 {
                let t = probe as f64;
                let empirical = times.iter().filter(|&&k| k as f64 > t).count() as f64 / n;
                let v = km.eval(t);
                prop_assert!((v - empirical).abs() < 1e-12);
                prop_assert!(v <= prev);
                prev = v;
            }
        }
    }
}
