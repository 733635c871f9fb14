//! Text format for PSFs: `rows cols` on the first line, then the entries
//! row by row, whitespace separated.

use ndarray::Array2;

use crate::error::{DeblurError, Result};

pub fn format_kernel(k: &Array2<f64>) -> String {
    let (r, c) = k.dim();
    let mut out = format!("{r} {c}\n");
    for row in k.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_kernel(text: &str) -> Result<Array2<f64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| DeblurError::Parse("kernel file is empty".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| DeblurError::Parse(format!("kernel header '{header}': {e}")))?;
    let [rows, cols] = dims[..] else {
        return Err(DeblurError::Parse(format!("kernel header '{header}' must be 'rows cols'")));
    };
    if rows == 0 || cols == 0 {
        return Err(DeblurError::Parse("kernel dimensions must be positive".into()));
    }
    let values: Vec<f64> = lines
        .flat_map(str::split_whitespace)
        .map(|t| t.parse::<f64>().map_err(|e| DeblurError::Parse(format!("kernel entry '{t}': {e}"))))
        .collect::<Result<_>>()?;
    if values.len() != rows * cols {
        return Err(DeblurError::Parse(format!("expected {} kernel entries, found {}", rows * cols, values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(DeblurError::Parse("kernel entries must be finite".into()));
    }
    Array2::from_shape_vec((rows, cols), values).map_err(|e| DeblurError::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::kernels::{make_kernel, KernelSpec};

    #[test]
    fn exact_round_trip() {
        for idx in 1..=4 {
            let k = make_kernel(&KernelSpec::table(idx).unwrap()).unwrap();
            assert_eq!(parse_kernel(&format_kernel(&k)).unwrap(), k);
        }
        let odd = Array2::from_shape_vec((1, 3), vec![1e-300, -0.1, 1.0 / 3.0]).unwrap();
        assert_eq!(parse_kernel(&format_kernel(&odd)).unwrap(), odd);
    }

    #[test]
    fn malformed_inputs() {
        assert!(parse_kernel("").is_err());
        assert!(parse_kernel("2 2\n1 2 3").is_err());
        assert!(parse_kernel("2\n1 2").is_err());
        assert!(parse_kernel("1 2\n1 x").is_err());
        assert!(parse_kernel("1 1\nNaN").is_err());
    }
}
