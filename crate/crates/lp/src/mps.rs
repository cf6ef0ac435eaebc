//! Fixed-format MPS reading and writing.
//!
//! The writer emits names of at most eight characters and values of at most
//! twelve, so its output is valid fixed-column MPS. The reader only splits on
//! whitespace and therefore also accepts free-format files with blank-free
//! names.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::LpError;
use crate::problem::{Problem, Row};

const OBJECTIVE_ROW: &str = "COST";

/// Shortest decimal text of at most twelve characters closest to `v`.
pub fn format_value(v: f64) -> String {
    let plain = format!("{v}");
    if plain.len() <= 12 {
        return plain;
    }
    let mut best: Option<(f64, String)> = None;
    let mut consider = |s: String| {
        if s.len() <= 12 {
            if let Ok(parsed) = s.parse::<f64>() {
                let err = (parsed - v).abs();
                if best.as_ref().is_none_or(|(e, b)| err < *e || (err == *e && s.len() < b.len())) {
                    best = Some((err, s));
                }
            }
        }
    };
    for digits in (0..=11).rev() {
        consider(format!("{v:.digits$e}"));
        consider(format!("{v:.digits$}"));
    }
    best.map(|(_, s)| s).unwrap_or(plain)
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.len() <= 8 && s.is_ascii() && !s.contains(char::is_whitespace)
}

fn names_or_fallback(names: &[String], prefix: char, reserved: &str) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    let ok = names
        .iter()
        .all(|n| valid_name(n) && n != reserved && seen.insert(n.as_str()));
    if ok {
        names.to_vec()
    } else {
        (0..names.len()).map(|i| format!("{prefix}{i:07}")).collect()
    }
}

pub fn write_mps<W: Write>(problem: &Problem, out: &mut W) -> Result<(), LpError> {
    problem.check()?;
    let cols = names_or_fallback(&problem.col_names, 'C', OBJECTIVE_ROW);
    let rows = names_or_fallback(&problem.row_names, 'R', OBJECTIVE_ROW);
    let name = if valid_name(&problem.name) {
        problem.name.as_str()
    } else {
        "PROBLEM"
    };
    writeln!(out, "NAME          {name}")?;
    writeln!(out, "ROWS")?;
    writeln!(out, " N  {OBJECTIVE_ROW}")?;
    for (row, rname) in problem.rows.iter().zip(&rows) {
        let kind = match (row.lower.is_finite(), row.upper.is_finite()) {
            (true, true) if row.lower == row.upper => "E",
            (false, true) => "L",
            (true, _) => "G",
            (false, false) => "N",
        };
        writeln!(out, " {kind:<2} {rname}")?;
    }

    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); problem.n_cols()];
    for (r, row) in problem.rows.iter().enumerate() {
        for &(c, a) in &row.coefs {
            by_col[c].push((r, a));
        }
    }
    writeln!(out, "COLUMNS")?;
    let mut in_int = false;
    let mut marker = 0usize;
    for (j, cname) in cols.iter().enumerate() {
        if problem.integer[j] != in_int {
            let tag = if in_int { "'INTEND'" } else { "'INTORG'" };
            writeln!(out, "    MARKER{marker:<2}  'MARKER'                 {tag}")?;
            marker += 1;
            in_int = problem.integer[j];
        }
        let mut entries = by_col[j].clone();
        entries.sort_by_key(|e| e.0);
        if problem.objective[j] != 0.0 || entries.is_empty() {
            writeln!(
                out,
                "    {cname:<8}  {OBJECTIVE_ROW:<8}  {:>12}",
                format_value(problem.objective[j])
            )?;
        }
        for (r, a) in entries {
            writeln!(out, "    {cname:<8}  {:<8}  {:>12}", rows[r], format_value(a))?;
        }
    }
    if in_int {
        writeln!(out, "    MARKER{marker:<2}  'MARKER'                 'INTEND'")?;
    }

    writeln!(out, "RHS")?;
    if problem.objective_offset != 0.0 {
        writeln!(
            out,
            "    RHS       {OBJECTIVE_ROW:<8}  {:>12}",
            format_value(-problem.objective_offset)
        )?;
    }
    for (row, rname) in problem.rows.iter().zip(&rows) {
        let rhs = if row.lower.is_finite() {
            row.lower
        } else if row.upper.is_finite() {
            row.upper
        } else {
            0.0
        };
        if rhs != 0.0 {
            writeln!(out, "    RHS       {rname:<8}  {:>12}", format_value(rhs))?;
        }
    }

    let ranged: Vec<(usize, f64)> = problem
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.relation().is_none() && r.lower.is_finite() && r.upper.is_finite())
        .map(|(i, r)| (i, r.upper - r.lower))
        .collect();
    if !ranged.is_empty() {
        writeln!(out, "RANGES")?;
        for (i, width) in ranged {
            writeln!(out, "    RNG       {:<8}  {:>12}", rows[i], format_value(width))?;
        }
    }

    writeln!(out, "BOUNDS")?;
    for (j, cname) in cols.iter().enumerate() {
        let (lo, hi) = (problem.col_lower[j], problem.col_upper[j]);
        let mut line = |kind: &str, v: Option<f64>| match v {
            Some(v) => writeln!(out, " {kind} BND       {cname:<8}  {:>12}", format_value(v)),
            None => writeln!(out, " {kind} BND       {cname}"),
        };
        if lo == hi {
            line("FX", Some(lo))?;
            continue;
        }
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            line("FR", None)?;
            continue;
        }
        if lo == f64::NEG_INFINITY {
            line("MI", None)?;
        } else if lo != 0.0 {
            line("LO", Some(lo))?;
        }
        if hi.is_finite() {
            line("UP", Some(hi))?;
        } else if problem.integer[j] {
            line("PL", None)?;
        }
    }
    writeln!(out, "ENDATA")?;
    Ok(())
}

pub fn to_mps_string(problem: &Problem) -> Result<String, LpError> {
    let mut buf = Vec::new();
    write_mps(problem, &mut buf)?;
    Ok(String::from_utf8(buf).expect("writer emits ASCII"))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
    End,
}

pub fn read_mps<R: BufRead>(input: R) -> Result<Problem, LpError> {
    let mut p = Problem::new("");
    let mut objective: Option<String> = None;
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut kinds: Vec<char> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut range: Vec<Option<f64>> = Vec::new();
    let mut section = Section::None;
    let mut in_int = false;

    let err = |line: usize, message: String| LpError::Mps { line, message };
    let number = |line: usize, s: &str| {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| err(line, format!("`{s}` is not a number")))
    };

    for (idx, text) in input.lines().enumerate() {
        let text = text?;
        let ln = idx + 1;
        if text.trim().is_empty() || text.starts_with('*') {
            continue;
        }
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if !text.starts_with(' ') && !text.starts_with('\t') {
            section = match tokens[0] {
                "NAME" => {
                    p.name = tokens.get(1).copied().unwrap_or("").to_string();
                    Section::None
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                other => return Err(err(ln, format!("unknown section `{other}`"))),
            };
            continue;
        }
        match section {
            Section::None | Section::End => {
                return Err(err(ln, "data outside a section".into()));
            }
            Section::Rows => {
                if tokens.len() != 2 {
                    return Err(err(ln, "expected `type name`".into()));
                }
                let kind = match tokens[0] {
                    "N" | "n" => 'N',
                    "L" | "l" => 'L',
                    "G" | "g" => 'G',
                    "E" | "e" => 'E',
                    t => return Err(err(ln, format!("unknown row type `{t}`"))),
                };
                let name = tokens[1].to_string();
                if kind == 'N' && objective.is_none() {
                    objective = Some(name);
                    continue;
                }
                if objective.as_deref() == Some(name.as_str()) || row_index.contains_key(&name) {
                    return Err(err(ln, format!("duplicate row `{name}`")));
                }
                row_index.insert(name.clone(), kinds.len());
                kinds.push(kind);
                rhs.push(0.0);
                range.push(None);
                p.add_row(name, Row { coefs: Vec::new(), lower: 0.0, upper: 0.0 });
            }
            Section::Columns => {
                if tokens.len() >= 3 && tokens[1] == "'MARKER'" {
                    match tokens[2] {
                        "'INTORG'" => in_int = true,
                        "'INTEND'" => in_int = false,
                        t => return Err(err(ln, format!("unknown marker `{t}`"))),
                    }
                    continue;
                }
                if tokens.len() != 3 && tokens.len() != 5 {
                    return Err(err(ln, "expected `column row value [row value]`".into()));
                }
                let cname = tokens[0];
                let j = match col_index.get(cname) {
                    Some(&j) if j + 1 == p.n_cols() => j,
                    Some(_) => return Err(err(ln, format!("column `{cname}` is not contiguous"))),
                    None => {
                        let j = p.add_col(cname, 0.0, 0.0, f64::INFINITY, in_int);
                        col_index.insert(cname.to_string(), j);
                        j
                    }
                };
                for pair in tokens[1..].chunks(2) {
                    let v = number(ln, pair[1])?;
                    if objective.as_deref() == Some(pair[0]) {
                        p.objective[j] += v;
                    } else if let Some(&r) = row_index.get(pair[0]) {
                        if v != 0.0 {
                            p.rows[r].coefs.push((j, v));
                        }
                    } else {
                        return Err(err(ln, format!("unknown row `{}`", pair[0])));
                    }
                }
            }
            Section::Rhs | Section::Ranges => {
                let body = if tokens.len() % 2 == 1 { &tokens[1..] } else { &tokens[..] };
                if body.is_empty() {
                    return Err(err(ln, "expected `[set] row value`".into()));
                }
                for pair in body.chunks(2) {
                    let v = number(ln, pair[1])?;
                    if objective.as_deref() == Some(pair[0]) {
                        if section == Section::Rhs {
                            p.objective_offset = -v;
                        } else {
                            return Err(err(ln, "range on the objective row".into()));
                        }
                    } else if let Some(&r) = row_index.get(pair[0]) {
                        if section == Section::Rhs {
                            rhs[r] = v;
                        } else {
                            range[r] = Some(v);
                        }
                    } else {
                        return Err(err(ln, format!("unknown row `{}`", pair[0])));
                    }
                }
            }
            Section::Bounds => {
                let kind = tokens[0].to_ascii_uppercase();
                let needs_value = matches!(kind.as_str(), "UP" | "LO" | "FX" | "LI" | "UI");
                let (cname, value) = match (needs_value, tokens.len()) {
                    (true, 4) => (tokens[2], Some(number(ln, tokens[3])?)),
                    (true, 3) => (tokens[1], Some(number(ln, tokens[2])?)),
                    (false, 3) => (tokens[2], None),
                    (false, 2) => (tokens[1], None),
                    _ => return Err(err(ln, "malformed bound".into())),
                };
                let &j = col_index
                    .get(cname)
                    .ok_or_else(|| err(ln, format!("unknown column `{cname}`")))?;
                match (kind.as_str(), value) {
                    ("UP" | "UI", Some(v)) => {
                        if v < 0.0 && p.col_lower[j] == 0.0 {
                            p.col_lower[j] = f64::NEG_INFINITY;
                        }
                        p.col_upper[j] = v;
                        if kind == "UI" {
                            p.integer[j] = true;
                        }
                    }
                    ("LO" | "LI", Some(v)) => {
                        p.col_lower[j] = v;
                        if kind == "LI" {
                            p.integer[j] = true;
                        }
                    }
                    ("FX", Some(v)) => {
                        p.col_lower[j] = v;
                        p.col_upper[j] = v;
                    }
                    ("FR", None) => {
                        p.col_lower[j] = f64::NEG_INFINITY;
                        p.col_upper[j] = f64::INFINITY;
                    }
                    ("MI", None) => p.col_lower[j] = f64::NEG_INFINITY,
                    ("PL", None) => p.col_upper[j] = f64::INFINITY,
                    ("BV", None) => {
                        p.col_lower[j] = 0.0;
                        p.col_upper[j] = 1.0;
                        p.integer[j] = true;
                    }
                    _ => return Err(err(ln, format!("unknown bound type `{kind}`"))),
                }
            }
        }
    }
    if section != Section::End {
        return Err(err(0, "missing ENDATA".into()));
    }
    for (r, row) in p.rows.iter_mut().enumerate() {
        let b = rhs[r];
        let (lo, hi) = match (kinds[r], range[r]) {
            ('N', _) => (f64::NEG_INFINITY, f64::INFINITY),
            ('L', None) => (f64::NEG_INFINITY, b),
            ('G', None) => (b, f64::INFINITY),
            ('E', None) => (b, b),
            ('L', Some(w)) => (b - w.abs(), b),
            ('G', Some(w)) => (b, b + w.abs()),
            ('E', Some(w)) if w >= 0.0 => (b, b + w),
            (_, Some(w)) => (b + w, b),
            _ => unreachable!(),
        };
        row.lower = lo;
        row.upper = hi;
    }
    p.check()?;
    Ok(p)
}

pub fn parse_mps(text: &str) -> Result<Problem, LpError> {
    read_mps(text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Relation;

    #[test]
    fn values_fit_twelve_characters() {
        for v in [0.1, 1.0 / 3.0, -2.0 / 7.0, 1e-17, 123456789.123, -9.87654321e200, 5.0] {
            let s = format_value(v);
            assert!(s.len() <= 12, "{s}");
            let back: f64 = s.parse().unwrap();
            assert!((back - v).abs() <= 1e-6 * v.abs(), "{v} -> {s}");
        }
        assert_eq!(format_value(2.5), "2.5");
    }

    #[test]
    fn round_trip_with_ranges_and_markers() {
        let mut p = Problem::new("T");
        p.add_col("x", 1.5, 0.0, 4.0, false);
        p.add_col("y", -2.0, -1.0, 3.0, true);
        p.add_col("z", 0.0, f64::NEG_INFINITY, f64::INFINITY, false);
        p.add_col("w", 0.0, 0.0, f64::INFINITY, true);
        p.objective_offset = 7.0;
        p.add_row("a", Row::new(vec![(0, 1.0), (1, 2.0)], Relation::Le, 5.0));
        p.add_row("b", Row::new(vec![(1, 1.0), (2, -1.0)], Relation::Eq, 0.5));
        p.add_row("c", Row { coefs: vec![(0, 1.0), (3, 1.0)], lower: 1.0, upper: 2.0 });
        let text = to_mps_string(&p).unwrap();
        let q = parse_mps(&text).unwrap();
        assert_eq!(p, q);
        assert_eq!(to_mps_string(&q).unwrap(), text);
    }

    #[test]
    fn long_names_fall_back_to_ordinals() {
        let mut p = Problem::new("T");
        p.add_col("a_very_long_name", 1.0, 0.0, 1.0, false);
        p.add_row("r", Row::new(vec![(0, 1.0)], Relation::Ge, 0.5));
        let q = parse_mps(&to_mps_string(&p).unwrap()).unwrap();
        assert_eq!(q.col_names, vec!["C0000000".to_string()]);
    }

    #[test]
    fn reports_line_of_bad_number() {
        let text = "NAME X\nROWS\n N  COST\n L  r\nCOLUMNS\n    x  r  abc\nRHS\nENDATA\n";
        match parse_mps(text) {
            Err(LpError::Mps { line, .. }) => assert_eq!(line, 6),
            other => panic!("{other:?}"),
        }
    }
}
