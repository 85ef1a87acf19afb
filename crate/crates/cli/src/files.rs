use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use injurybench::speed::{ApproxSequence, ModulusFn};
use injurybench::trace::{self, Trace};
use injurybench::Dyadic;

use crate::{locate, Failure};

pub fn read_trace(path: &Path) -> Result<Trace, Failure> {
    let path = locate(path);
    let file = File::open(&path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let (trace, _) = Trace::read_jsonl(BufReader::new(file))
        .map_err(|e| Failure::usage(format!("{}: parse error: {e}", path.display())))?;
    Ok(trace)
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>, Failure> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// A sequence from `t,mantissa,exponent` CSV rows, or from JSON when the
/// extension says so.
pub fn read_sequence(path: &Path) -> Result<ApproxSequence, Failure> {
    let path = locate(path);
    let bad = |msg: String| Failure::usage(format!("{}: {msg}", path.display()));
    if path.extension().is_some_and(|e| e == "json") {
        let text = std::fs::read_to_string(&path).map_err(|e| bad(e.to_string()))?;
        return serde_json::from_str(&text).map_err(|e| bad(e.to_string()));
    }
    let mut values = Vec::new();
    for (i, row) in csv_reader(&path)?.records().enumerate() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let field = |k: usize| {
            row.get(k)
                .ok_or_else(|| bad(format!("row {i} has {} fields", row.len())))
        };
        let t: usize = field(0)?
            .parse()
            .map_err(|_| bad(format!("row {i}: bad index")))?;
        if t != i {
            return Err(bad(format!("row {i} has index {t}")));
        }
        let v: Dyadic = format!("{}/2^{}", field(1)?, field(2)?)
            .parse()
            .map_err(|e| bad(format!("row {i}: {e}")))?;
        values.push(v);
    }
    let tag = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    ApproxSequence::new(values, None, tag).map_err(|e| bad(e.to_string()))
}

pub fn write_sequence<W: Write>(values: &[Dyadic], out: W) -> std::io::Result<()> {
    trace::write_sequence_csv(values, out)
}

/// `identity`, `affine:MUL,ADD`, a JSON modulus, or an `n,f(n)` CSV table.
pub fn read_modulus(spec: &str) -> Result<ModulusFn, Failure> {
    if spec == "identity" {
        return Ok(ModulusFn::identity());
    }
    if let Some(rest) = spec.strip_prefix("affine:") {
        let (mul, add) = rest
            .split_once(',')
            .ok_or_else(|| Failure::usage(format!("expected affine:MUL,ADD, got {spec:?}")))?;
        let num = |s: &str| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| Failure::usage(format!("bad coefficient in {spec:?}")))
        };
        return Ok(ModulusFn::Affine {
            mul: num(mul)?,
            add: num(add)?,
        });
    }
    let path = locate(Path::new(spec));
    let bad = |msg: String| Failure::usage(format!("{}: {msg}", path.display()));
    if path.extension().is_some_and(|e| e == "json") {
        let text = std::fs::read_to_string(&path).map_err(|e| bad(e.to_string()))?;
        return serde_json::from_str(&text).map_err(|e| bad(e.to_string()));
    }
    let mut values = Vec::new();
    for (i, row) in csv_reader(&path)?.records().enumerate() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let parse = |k: usize| -> Result<u64, Failure> {
            row.get(k)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad(format!("row {i}: expected two naturals")))
        };
        if parse(0)? != i as u64 {
            return Err(bad(format!("row {i} is out of order")));
        }
        values.push(parse(1)?);
    }
    Ok(ModulusFn::Table { values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modulus_forms() {
        assert_eq!(read_modulus("identity").unwrap(), ModulusFn::identity());
        assert_eq!(
            read_modulus("affine:3, 1").unwrap(),
            ModulusFn::Affine { mul: 3, add: 1 }
        );
        assert_eq!(read_modulus("affine:3").unwrap_err().code, 2);
        assert_eq!(read_modulus("affine:x,1").unwrap_err().code, 2);

        let dir = tempfile::tempdir().unwrap();
        let table = dir.path().join("f.csv");
        std::fs::write(&table, "n,f\n0,2\n1,2\n2,5\n").unwrap();
        let f = read_modulus(table.to_str().unwrap()).unwrap();
        assert_eq!(
            f,
            ModulusFn::Table {
                values: vec![2, 2, 5]
            }
        );

        std::fs::write(&table, "n,f\n0,2\n2,5\n").unwrap();
        assert!(read_modulus(table.to_str().unwrap())
            .unwrap_err()
            .msg
            .contains("out of order"));

        let json = dir.path().join("f.json");
        std::fs::write(&json, r#"{"kind": "step", "steps": [[0, 1], [4, 3]]}"#).unwrap();
        let f = read_modulus(json.to_str().unwrap()).unwrap();
        assert_eq!(f.eval(5), Some(3));
    }

    #[test]
    fn sequence_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let values: Vec<Dyadic> = ["0", "1/2^3", "3/4", "5/2"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        write_sequence(&values, File::create(&path).unwrap()).unwrap();
        let seq = read_sequence(&path).unwrap();
        assert_eq!(seq.values, values);
        assert_eq!(seq.tag, "x");
        assert!(seq.known_limit.is_none());

        std::fs::write(&path, "t,mantissa,exponent\n0,0,0\n2,1,1\n").unwrap();
        assert!(read_sequence(&path)
            .unwrap_err()
            .msg
            .contains("row 1 has index 2"));
    }
}
