//! Indexed sample access.
//!
//! Signals in the two-sensor model live on integer index ranges that do not
//! start at zero (the decoder sees `[-d_max, N-1+d_max]`). [`Samples`] is the
//! read interface every estimator is written against, so the same code runs
//! on plain slices, offset [`Window`]s, and read-counting wrappers.

use std::cell::Cell;

use num_complex::Complex64;

pub trait Samples {
    /// Index of the first stored sample.
    fn first_index(&self) -> i64;

    fn len(&self) -> usize;

    /// Sample at absolute index `n`. Panics when `n` is outside the range.
    fn sample(&self, n: i64) -> Complex64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index one past the last stored sample.
    fn end_index(&self) -> i64 {
        self.first_index() + self.len() as i64
    }

    /// True when every index in `lo..=hi` is stored.
    fn covers(&self, lo: i64, hi: i64) -> bool {
        lo >= self.first_index() && hi < self.end_index()
    }
}

impl Samples for [Complex64] {
    fn first_index(&self) -> i64 {
        0
    }

    fn len(&self) -> usize {
        <[Complex64]>::len(self)
    }

    #[inline]
    fn sample(&self, n: i64) -> Complex64 {
        self[n as usize]
    }
}

/// A contiguous run of samples starting at an arbitrary signed index.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    start: i64,
    data: Vec<Complex64>,
}

impl Window {
    pub fn new(start: i64, data: Vec<Complex64>) -> Self {
        Self { start, data }
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn get(&self, n: i64) -> Option<Complex64> {
        let i = n.checked_sub(self.start)?;
        if i < 0 {
            return None;
        }
        self.data.get(i as usize).copied()
    }

    /// Borrow `len` samples starting at absolute index `from`.
    pub fn range(&self, from: i64, len: usize) -> Option<&[Complex64]> {
        let i = from.checked_sub(self.start)?;
        if i < 0 {
            return None;
        }
        self.data.get(i as usize..i as usize + len)
    }
}

impl Samples for Window {
    fn first_index(&self) -> i64 {
        self.start
    }

    fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    fn sample(&self, n: i64) -> Complex64 {
        self.data[(n - self.start) as usize]
    }
}

/// Wraps a sample source and counts every read.
pub struct Counted<'a, S: ?Sized> {
    inner: &'a S,
    reads: Cell<u64>,
}

impl<'a, S: Samples + ?Sized> Counted<'a, S> {
    pub fn new(inner: &'a S) -> Self {
        Self {
            inner,
            reads: Cell::new(0),
        }
    }

    pub fn reads(&self) -> u64 {
        self.reads.get()
    }

    pub fn reset(&self) {
        self.reads.set(0);
    }
}

impl<S: Samples + ?Sized> Samples for Counted<'_, S> {
    fn first_index(&self) -> i64 {
        self.inner.first_index()
    }

    fn len(&self) -> usize {
        self.inner.len()
    }

    #[inline]
    fn sample(&self, n: i64) -> Complex64 {
        self.reads.set(self.reads.get() + 1);
        self.inner.sample(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn window_indexing_is_offset() {
        let w = Window::new(-2, vec![c(0.0), c(1.0), c(2.0), c(3.0)]);
        assert_eq!(w.sample(-2), c(0.0));
        assert_eq!(w.sample(1), c(3.0));
        assert_eq!(w.get(2), None);
        assert_eq!(w.get(-3), None);
        assert!(w.covers(-2, 1));
        assert!(!w.covers(-3, 1));
        assert_eq!(w.range(-1, 2).unwrap(), &[c(1.0), c(2.0)]);
        assert!(w.range(0, 3).is_none());
    }

    #[test]
    fn counted_reads() {
        let v = [c(1.0); 8];
        let counted = Counted::new(&v[..]);
        for n in 0..5 {
            counted.sample(n);
        }
        assert_eq!(counted.reads(), 5);
        counted.reset();
        assert_eq!(counted.reads(), 0);
    }
}
