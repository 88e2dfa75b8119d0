//! Published detector scores for random, cwm and owe acquisition on the
//! full-scale driving benchmark, kept as fixed-point constants so rendering
//! never drifts from the source digits.

use std::fmt;

use serde::{Serialize, Serializer};

/// A score in hundredths of a percentage point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Score(pub u32);

impl Score {
    pub fn value(self) -> f64 {
        f64::from(self.0) / 100.0
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&format!("{}.{:02}", self.0 / 100, self.0 % 100))
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.value())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MeanStdScore {
    pub mean: Score,
    pub std: Score,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MetricRow {
    pub random: Score,
    pub cwm: MeanStdScore,
    pub owe: MeanStdScore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReferenceRow {
    pub round: u32,
    pub percent: u32,
    pub map: MetricRow,
    pub nds: MetricRow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReferenceTable {
    pub rows: Vec<ReferenceRow>,
    /// Scores from training on the full split.
    pub full_map: Score,
    pub full_nds: Score,
}

const fn ms(mean: u32, std: u32) -> MeanStdScore {
    MeanStdScore { mean: Score(mean), std: Score(std) }
}

#[rustfmt::skip]
const ROWS: [(u32, u32, [u32; 5], [u32; 5]); 5] = [
    (1, 10, [3095, 2894, 37, 3214, 76],  [3353, 3259, 33, 3485, 71]),
    (2, 20, [3800, 4061, 94, 4170, 95],  [4014, 4134, 56, 4244, 96]),
    (3, 30, [4494, 4528, 93, 4694, 25],  [4841, 4882, 86, 5084, 116]),
    (4, 40, [4773, 4926, 53, 4959, 66],  [5310, 5364, 32, 5299, 59]),
    (5, 50, [4990, 5098, 13, 5174, 108], [5564, 5640, 40, 5661, 109]),
];

fn metric(v: [u32; 5]) -> MetricRow {
    MetricRow { random: Score(v[0]), cwm: ms(v[1], v[2]), owe: ms(v[3], v[4]) }
}

impl ReferenceTable {
    pub fn get() -> Self {
        Self {
            rows: ROWS
                .iter()
                .map(|&(round, percent, map, nds)| ReferenceRow { round, percent, map: metric(map), nds: metric(nds) })
                .collect(),
            full_map: Score(5288),
            full_nds: Score(5873),
        }
    }

    pub fn row(&self, percent: u32) -> Option<&ReferenceRow> {
        self.rows.iter().find(|r| r.percent == percent)
    }

    const HEADER: [&'static str; 12] = [
        "round",
        "percent",
        "map_random",
        "map_cwm_mean",
        "map_cwm_std",
        "map_owe_mean",
        "map_owe_std",
        "nds_random",
        "nds_cwm_mean",
        "nds_cwm_std",
        "nds_owe_mean",
        "nds_owe_std",
    ];

    fn cells(r: &ReferenceRow) -> Vec<String> {
        let m = |x: &MetricRow| [x.random, x.cwm.mean, x.cwm.std, x.owe.mean, x.owe.std].map(|s| s.to_string());
        let mut out = vec![r.round.to_string(), r.percent.to_string()];
        out.extend(m(&r.map));
        out.extend(m(&r.nds));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::HEADER).expect("writing to memory");
        for r in &self.rows {
            w.write_record(Self::cells(r)).expect("writing to memory");
        }
        let full = [self.full_map, self.full_nds].map(|s| s.to_string());
        let mut last = vec![String::new(), "100".into(), full[0].clone()];
        last.extend(std::iter::repeat_n(String::new(), 4));
        last.push(full[1].clone());
        last.extend(std::iter::repeat_n(String::new(), 4));
        w.write_record(last).expect("writing to memory");
        String::from_utf8(w.into_inner().expect("flushing to memory")).expect("csv output is utf-8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}

impl fmt::Display for ReferenceTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>5} {:>4} | {:^38} | {:^38}", "", "", "mAP", "NDS")?;
        writeln!(
            f,
            "{:>5} {:>4} | {:>6} {:>15} {:>15} | {:>6} {:>15} {:>15}",
            "round", "pool", "random", "cwm mean (std)", "owe mean (std)", "random", "cwm mean (std)", "owe mean (std)"
        )?;
        let pair = |m: MeanStdScore| format!("{} ({})", m.mean, m.std);
        for r in &self.rows {
            writeln!(
                f,
                "{:>5} {:>3}% | {:>6} {:>15} {:>15} | {:>6} {:>15} {:>15}",
                r.round,
                r.percent,
                r.map.random,
                pair(r.map.cwm),
                pair(r.map.owe),
                r.nds.random,
                pair(r.nds.cwm),
                pair(r.nds.owe)
            )?;
        }
        writeln!(f, "{:>5} {:>3}% | {:>38} | {:>38}", "", 100, self.full_map, self.full_nds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_values() {
        let t = ReferenceTable::get();
        let r10 = t.row(10).unwrap();
        assert_eq!(r10.map.random.to_string(), "30.95");
        assert_eq!(r10.map.owe.mean.to_string(), "32.14");
        assert_eq!(r10.map.owe.std.to_string(), "0.76");
        let r50 = t.row(50).unwrap();
        assert_eq!(r50.map.random.to_string(), "49.90");
        assert_eq!(r50.map.owe.mean.to_string(), "51.74");
        assert_eq!(r50.nds.random.to_string(), "55.64");
        assert_eq!(r50.nds.owe.mean.to_string(), "56.61");
        assert_eq!(t.full_map.to_string(), "52.88");
        assert_eq!(t.full_nds.to_string(), "58.73");
    }

    #[test]
    fn renderings_agree() {
        let t = ReferenceTable::get();
        let csv = t.to_csv();
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.lines().nth(1).unwrap().starts_with("1,10,30.95,28.94,0.37,32.14,0.76,33.53"));
        let json: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(json["rows"][4]["nds"]["owe"]["std"], 1.09);
        assert_eq!(json["full_map"], 52.88);
        let text = t.to_string();
        assert!(text.contains("30.95") && text.contains("52.99 (0.59)") && text.contains("58.73"));
    }
}
