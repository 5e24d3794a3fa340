use crate::error::{Error, Result};

/// Contiguous segment bounds `[start, end)` for every level, in order. The
/// remainder of an uneven split goes to the leftmost segments.
pub fn pyramid_segments(len: usize, levels: &[usize]) -> Result<Vec<(usize, usize)>> {
    let max = levels.iter().copied().max().unwrap_or(0);
    if max == 0 || levels.contains(&0) {
        return Err(Error::Config("pyramid levels must be positive".into()));
    }
    if len < max {
        return Err(Error::shape(max, len));
    }
    let mut segments = Vec::with_capacity(levels.iter().sum());
    for &level in levels {
        let (base, rem) = (len / level, len % level);
        let mut start = 0;
        for r in 0..level {
            let size = base + usize::from(r < rem);
            segments.push((start, start + size));
            start += size;
        }
    }
    Ok(segments)
}

/// Segment means of `values` at each pyramid level, concatenated.
pub fn pyramid_pool_1d(values: &[f64], levels: &[usize]) -> Result<Vec<f64>> {
    Ok(pyramid_segments(values.len(), levels)?
        .into_iter()
        .map(|(a, b)| values[a..b].iter().sum::<f64>() / (b - a) as f64)
        .collect())
}
