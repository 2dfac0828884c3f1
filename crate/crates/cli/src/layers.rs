use crate::error::CliError;

/// Parse `all`, `K`, `A-B` or `a,b,c` against `n_layers` available layers.
pub fn parse_layers(spec: &str, n_layers: usize) -> Result<Vec<usize>, CliError> {
    let spec = spec.trim();
    if spec == "all" {
        return Ok((0..n_layers).collect());
    }
    let mut out = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        let bad = || CliError::config(format!("bad layer selection '{part}'"));
        if let Some((a, b)) = part.split_once('-') {
            let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            if a > b {
                return Err(bad());
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    if let Some(&l) = out.iter().find(|&&l| l >= n_layers) {
        return Err(CliError::config(format!("layer {l} out of range (0..{n_layers})")));
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}
