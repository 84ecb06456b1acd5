use crate::error::{GlimmerError, Result};

/// Splits `items` into the first `floor(fraction * n)` elements and the rest, keeping order.
pub fn chronological_split<T: Clone>(items: &[T], fraction: f64) -> Result<(Vec<T>, Vec<T>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(GlimmerError::Split(format!(
            "fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let head_len = (fraction * items.len() as f64).floor() as usize;
    if head_len == 0 || head_len == items.len() {
        return Err(GlimmerError::Split(format!(
            "splitting {} items at {fraction} leaves an empty part",
            items.len()
        )));
    }
    let (head, tail) = items.split_at(head_len);
    Ok((head.to_vec(), tail.to_vec()))
}
