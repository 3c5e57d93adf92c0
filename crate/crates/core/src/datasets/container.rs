//! Single-file text container for a [`DomainPath`].
//!
//! ```text
//! gdalab-path 1
//! d <dim>
//! T <steps>
//! n <n_per_domain>
//! scale <normalization scale>
//! descriptor <t> <value> <free text to end of line>     (one per domain)
//! x0,x1,...,x{d-1},label,domain
//! <features...>,<-1|1>,<t>                               (one per sample)
//! ```
//!
//! Numbers are written with 17 significant digits so a reload is exact.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{Domain, DomainPath, Label, LabeledSample, ShiftDescriptor};
use crate::error::{io_err, Error, Result};
use crate::numfmt::sig17;

const MAGIC: &str = "gdalab-path 1";

fn bad(detail: impl Into<String>) -> Error {
    Error::Format {
        what: "path file",
        detail: detail.into(),
    }
}

pub fn write_path(path: &DomainPath, out: &mut impl Write) -> std::io::Result<()> {
    let mut s = String::new();
    let d = path.dim();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "d {d}");
    let _ = writeln!(s, "T {}", path.steps());
    let _ = writeln!(s, "n {}", path.n_per_domain());
    let _ = writeln!(s, "scale {}", sig17(path.normalization_scale()));
    for (t, dom) in path.domains().iter().enumerate() {
        let text = dom.descriptor.text.replace(['\n', '\r'], " ");
        let _ = writeln!(s, "descriptor {t} {} {text}", sig17(dom.descriptor.value));
    }
    let header: Vec<String> = (0..d).map(|k| format!("x{k}")).collect();
    let _ = writeln!(s, "{},label,domain", header.join(","));
    for (t, dom) in path.domains().iter().enumerate() {
        for smp in dom.evaluation_samples() {
            for v in &smp.x {
                s.push_str(&sig17(*v));
                s.push(',');
            }
            let _ = writeln!(s, "{},{t}", smp.y.value() as i8);
        }
    }
    out.write_all(s.as_bytes())
}

pub fn read_path(file: &Path) -> Result<DomainPath> {
    let f = std::fs::File::open(file).map_err(io_err(file))?;
    parse_path(BufReader::new(f))
}

pub(crate) fn parse_path(reader: impl BufRead) -> Result<DomainPath> {
    let mut lines = reader.lines();
    let mut next = || -> Result<String> {
        match lines.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(bad(e.to_string())),
            None => Err(bad("unexpected end of file")),
        }
    };
    if next()?.trim() != MAGIC {
        return Err(bad(format!("missing `{MAGIC}` header")));
    }
    let field = |line: String, key: &str| -> Result<String> {
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .map(|r| r.trim().to_string())
            .ok_or_else(|| bad(format!("expected `{key} ...`, got {line:?}")))
    };
    let num = |s: String, key: &str| -> Result<usize> {
        s.parse().map_err(|_| bad(format!("bad {key}: {s:?}")))
    };
    let d = num(field(next()?, "d")?, "d")?;
    let steps = num(field(next()?, "T")?, "T")?;
    let n = num(field(next()?, "n")?, "n")?;
    let scale: f64 = field(next()?, "scale")?
        .parse()
        .map_err(|_| bad("bad scale"))?;

    let mut descriptors = Vec::with_capacity(steps + 1);
    for t in 0..=steps {
        let rest = field(next()?, "descriptor")?;
        let mut parts = rest.splitn(3, ' ');
        let idx: usize = parts.next().and_then(|p| p.parse().ok()).ok_or_else(|| bad("bad descriptor index"))?;
        if idx != t {
            return Err(bad(format!("descriptor {idx} out of order, expected {t}")));
        }
        let value: f64 = parts.next().and_then(|p| p.parse().ok()).ok_or_else(|| bad("bad descriptor value"))?;
        let text = parts.next().unwrap_or("").to_string();
        descriptors.push(ShiftDescriptor::new(text, value));
    }
    next()?; // column header

    let mut buckets: Vec<Vec<LabeledSample>> = vec![Vec::new(); steps + 1];
    for (row, line) in lines.enumerate() {
        let line = line.map_err(|e| bad(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != d + 2 {
            return Err(bad(format!("row {row}: expected {} cells, got {}", d + 2, cells.len())));
        }
        let parse = |c: &str| c.trim().parse::<f64>().map_err(|_| bad(format!("row {row}: bad number {c:?}")));
        let x = cells[..d].iter().map(|c| parse(c)).collect::<Result<Vec<_>>>()?;
        let y = Label::from_value(parse(cells[d])?)?;
        let t: usize = cells[d + 1].trim().parse().map_err(|_| bad(format!("row {row}: bad domain index")))?;
        buckets
            .get_mut(t)
            .ok_or_else(|| bad(format!("row {row}: domain {t} > T")))?
            .push(LabeledSample::new(x, y));
    }
    let domains = buckets
        .into_iter()
        .zip(descriptors)
        .map(|(samples, desc)| Domain::new(samples, desc))
        .collect::<Result<Vec<_>>>()?;
    DomainPath::new(domains, n, scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{make_rotation_path, Generator};

    #[test]
    fn container_round_trip_is_exact() {
        let gen = Generator::TwoMoons { noise_sigma: 0.1 };
        let p = make_rotation_path(&gen, 0.0, 45.0, 3, 17, 5).unwrap();
        let mut buf = Vec::new();
        write_path(&p, &mut buf).unwrap();
        let q = parse_path(buf.as_slice()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_path("hello\n".as_bytes()).is_err());
        let truncated = "gdalab-path 1\nd 2\nT 1\n";
        assert!(parse_path(truncated.as_bytes()).is_err());
        let bad_row = "gdalab-path 1\nd 1\nT 1\nn 1\nscale 1\ndescriptor 0 0 a\ndescriptor 1 0 b\nx0,label,domain\n0.1,1,0\n0.2,1,5\n";
        assert!(parse_path(bad_row.as_bytes()).is_err());
    }
}
