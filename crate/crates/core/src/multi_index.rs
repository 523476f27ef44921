/// Lexicographic iteration over `[0, shape[0]) x ... x [0, shape[K-1])`,
/// with the last coordinate varying fastest.
#[derive(Debug, Clone)]
pub struct MultiIndices {
    shape: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl MultiIndices {
    pub fn new(shape: &[usize]) -> Self {
        let next = if shape.iter().all(|&n| n > 0) { Some(vec![0; shape.len()]) } else { None };
        Self { shape: shape.to_vec(), next }
    }
}

impl Iterator for MultiIndices {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut k = succ.len();
        while k > 0 {
            k -= 1;
            succ[k] += 1;
            if succ[k] < self.shape[k] {
                self.next = Some(succ);
                return Some(current);
            }
            succ[k] = 0;
        }
        Some(current)
    }
}

/// Product of the shape entries, saturating on overflow.
pub fn product_size(shape: &[usize]) -> usize {
    shape.iter().fold(1usize, |acc, &n| acc.saturating_mul(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerates_in_lexicographic_order() {
        let all: Vec<Vec<usize>> = MultiIndices::new(&[2, 3]).collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], vec![0, 0]);
        assert_eq!(all[1], vec![0, 1]);
        assert_eq!(all[5], vec![1, 2]);
        assert_eq!(MultiIndices::new(&[]).count(), 1);
        assert_eq!(MultiIndices::new(&[3, 0]).count(), 0);
    }
}
