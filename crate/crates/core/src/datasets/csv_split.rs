use std::collections::HashMap;
use std::path::Path;

use super::{norm, Domain, DomainPath, Label, LabeledSample, ShiftDescriptor};
use crate::error::{invalid, io_err, Error, Result};

/// How to cut a sorted table into source, intermediate and target domains.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSplit {
    pub sort_column: String,
    pub label_column: String,
    pub source_size: usize,
    pub target_size: usize,
    /// Number of adaptation steps; T - 1 intermediate domains are cut.
    pub steps: usize,
    /// Rows per intermediate domain.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvSplitReport {
    pub positive_label: String,
    pub negative_label: String,
    pub dropped_rows: usize,
    /// Row ranges (in sorted order, half open) used for each domain.
    pub ranges: Vec<(usize, usize)>,
}

struct Row {
    key: f64,
    features: Vec<f64>,
    label: Label,
}

/// Reads a headered CSV file and splits it along `sort_column`.
///
/// Rows whose label is not one of the two most frequent values are dropped
/// (most frequent maps to +1). Rows are sorted ascending by the sort key
/// (stable). Features are every column except the label, min-max scaled per
/// column over the retained rows and then divided by the largest row norm,
/// which becomes the path's normalization scale.
pub fn load_csv_path(file: &Path, split: &CsvSplit) -> Result<(DomainPath, CsvSplitReport)> {
    let f = std::fs::File::open(file).map_err(io_err(file))?;
    split_reader(f, split)
}

pub(crate) fn split_reader<R: std::io::Read>(reader: R, split: &CsvSplit) -> Result<(DomainPath, CsvSplitReport)> {
    if split.steps == 0 {
        return Err(invalid("T must be at least 1"));
    }
    if split.source_size == 0 || split.target_size == 0 {
        return Err(invalid("source and target sizes must be positive"));
    }
    if split.steps > 1 && split.n == 0 {
        return Err(invalid("n must be positive"));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let label_idx = find(&split.label_column)?;
    let sort_idx = find(&split.sort_column)?;
    if label_idx == sort_idx {
        return Err(invalid("sort column and label column must differ"));
    }
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&i| i != label_idx).collect();

    let mut raw: Vec<(String, Vec<f64>, f64)> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            let cell = rec.get(i).unwrap_or("").trim();
            cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Format {
                what: "csv",
                detail: format!(
                    "row {}: column `{}` is not numeric: {cell:?}",
                    line + 2,
                    headers[i]
                ),
            })
        };
        let key = parse(sort_idx)?;
        let features = feature_cols.iter().map(|&i| parse(i)).collect::<Result<Vec<_>>>()?;
        let label = rec.get(label_idx).unwrap_or("").trim().to_string();
        raw.push((label, features, key));
    }

    let mut counts: HashMap<&str, usize> = HashMap::new();
    for (l, _, _) in &raw {
        *counts.entry(l.as_str()).or_default() += 1;
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    if ranked.len() < 2 {
        return Err(invalid(format!(
            "label column `{}` needs at least two distinct values",
            split.label_column
        )));
    }
    let positive = ranked[0].0.to_string();
    let negative = ranked[1].0.to_string();

    let mut rows: Vec<Row> = raw
        .iter()
        .filter_map(|(l, f, k)| {
            let label = if *l == positive {
                Label::Pos
            } else if *l == negative {
                Label::Neg
            } else {
                return None;
            };
            Some(Row {
                key: *k,
                features: f.clone(),
                label,
            })
        })
        .collect();
    let dropped = raw.len() - rows.len();
    rows.sort_by(|a, b| a.key.total_cmp(&b.key));

    let ranges = split_ranges(rows.len(), split)?;

    // min-max per column, then a single norm divisor
    let d = feature_cols.len();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for r in &rows {
        for (k, v) in r.features.iter().enumerate() {
            lo[k] = lo[k].min(*v);
            hi[k] = hi[k].max(*v);
        }
    }
    let minmax = |x: &[f64]| -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(k, v)| if hi[k] > lo[k] { (v - lo[k]) / (hi[k] - lo[k]) } else { 0.0 })
            .collect()
    };
    let scaled: Vec<Vec<f64>> = rows.iter().map(|r| minmax(&r.features)).collect();
    let scale = scaled.iter().map(|x| norm(x)).fold(0.0, f64::max).max(f64::MIN_POSITIVE);

    let mut domains = Vec::with_capacity(ranges.len());
    for &(a, b) in &ranges {
        let samples = (a..b)
            .map(|i| LabeledSample::new(scaled[i].iter().map(|v| v / scale).collect(), rows[i].label))
            .collect();
        let mean_key = rows[a..b].iter().map(|r| r.key).sum::<f64>() / (b - a) as f64;
        let desc = ShiftDescriptor::new(
            format!(
                "rows {a}..{b} {} in [{}, {}]",
                split.sort_column,
                rows[a].key,
                rows[b - 1].key
            ),
            mean_key,
        );
        domains.push(Domain::new(samples, desc)?);
    }
    let path = DomainPath::new(domains, split.n.max(1), scale)?;
    Ok((
        path,
        CsvSplitReport {
            positive_label: positive,
            negative_label: negative,
            dropped_rows: dropped,
            ranges,
        },
    ))
}

/// Source = first block, target = last block, intermediates = `n`
/// consecutive rows centred in each of T-1 equal bins of the middle block.
fn split_ranges(total: usize, split: &CsvSplit) -> Result<Vec<(usize, usize)>> {
    let inter = split.steps - 1;
    let needed = split.source_size + split.target_size + inter * split.n;
    if total < needed {
        return Err(invalid(format!(
            "insufficient rows: have {total}, need {needed} (source {}, target {}, {inter} x {})",
            split.source_size, split.target_size, split.n
        )));
    }
    let mid_start = split.source_size;
    let mid_len = total - split.source_size - split.target_size;
    let mut ranges = vec![(0, split.source_size)];
    let mut prev_end = mid_start;
    for k in 0..inter {
        let center = (k as f64 + 0.5) * mid_len as f64 / inter as f64;
        let start = (center - split.n as f64 / 2.0).round().max(0.0) as usize;
        let start = start.min(mid_len - split.n);
        let start = (mid_start + start).max(prev_end);
        ranges.push((start, start + split.n));
        prev_end = start + split.n;
    }
    ranges.push((total - split.target_size, total));
    Ok(ranges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn split(steps: usize, n: usize) -> CsvSplit {
        CsvSplit {
            sort_column: "dist".into(),
            label_column: "cover".into(),
            source_size: 3,
            target_size: 3,
            steps,
            n,
        }
    }

    fn ten_rows_shuffled() -> String {
        let mut s = String::from("dist,elev,cover\n");
        for k in [7, 2, 9, 0, 5, 3, 8, 1, 6, 4] {
            let label = if k % 3 == 0 { "b" } else { "a" };
            s.push_str(&format!("{k},{},{label}\n", 100 - k));
        }
        s
    }

    #[test]
    fn ten_row_split_sizes_and_order() {
        let (path, rep) = split_reader(ten_rows_shuffled().as_bytes(), &split(2, 4)).unwrap();
        let sizes: Vec<usize> = path.domains().iter().map(Domain::len).collect();
        assert_eq!(sizes, vec![3, 4, 3]);
        assert_eq!(rep.ranges, vec![(0, 3), (3, 7), (7, 10)]);
        assert_eq!(rep.positive_label, "a");
        assert_eq!(rep.dropped_rows, 0);
        // feature 0 is the scaled sort key; ascending within and across domains
        let keys: Vec<f64> = path
            .domains()
            .iter()
            .flat_map(|d| d.evaluation_samples().iter().map(|s| s.x[0]))
            .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]), "{keys:?}");
        for d in path.domains() {
            assert!(d.max_norm() <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn missing_label_column_is_named() {
        let mut s = split(2, 4);
        s.label_column = "nope".into();
        let err = split_reader(ten_rows_shuffled().as_bytes(), &s).unwrap_err();
        assert!(err.to_string().contains("nope"), "{err}");
    }

    #[test]
    fn non_numeric_sort_key_and_short_files() {
        let bad = "dist,cover\n1,a\nfar,b\n3,a\n";
        let err = split_reader(bad.as_bytes(), &split(1, 1)).unwrap_err();
        assert!(err.to_string().contains("dist"), "{err}");
        let err = split_reader(ten_rows_shuffled().as_bytes(), &split(3, 4)).unwrap_err();
        assert!(err.to_string().contains("insufficient"), "{err}");
    }

    #[test]
    fn extra_labels_are_dropped() {
        let s = "dist,cover\n1,a\n2,a\n3,b\n4,c\n5,a\n6,b\n7,a\n";
        let sp = CsvSplit {
            sort_column: "dist".into(),
            label_column: "cover".into(),
            source_size: 2,
            target_size: 2,
            steps: 2,
            n: 2,
        };
        let (path, rep) = split_reader(s.as_bytes(), &sp).unwrap();
        assert_eq!(rep.dropped_rows, 1);
        assert_eq!((rep.positive_label.as_str(), rep.negative_label.as_str()), ("a", "b"));
        assert_eq!(path.domains().iter().map(Domain::len).sum::<usize>(), 6);
    }

    #[test]
    fn intermediate_windows_are_spread() {
        let mut s = String::from("k,y\n");
        for i in 0..40 {
            s.push_str(&format!("{i},{}\n", i % 2));
        }
        let sp = CsvSplit {
            sort_column: "k".into(),
            label_column: "y".into(),
            source_size: 5,
            target_size: 5,
            steps: 4,
            n: 4,
        };
        let (_, rep) = split_reader(s.as_bytes(), &sp).unwrap();
        // middle block rows 5..35, bins of 10, centres 10, 20, 30
        assert_eq!(rep.ranges, vec![(0, 5), (8, 12), (18, 22), (28, 32), (35, 40)]);
    }
}
