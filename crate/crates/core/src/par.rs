//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) [`Exec::Parallel`] dispatches onto
//! the rayon global pool; without it, or with [`Exec::Sequential`], the same
//! closures run in order on the calling thread. Results are always returned in
//! index order, so both paths produce identical output.

/// Execution strategy for the data-parallel entry points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// `Parallel` is honoured only when the crate is built with `parallel`.
    pub fn effective(self) -> Exec {
        if cfg!(feature = "parallel") {
            self
        } else {
            Exec::Sequential
        }
    }
}

/// `(0..n).map(f)` collected in index order.
pub fn map_range<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    match exec.effective() {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Applies `f` to each chunk of `data` of `chunk` elements, in parallel when
/// allowed, collecting one result per chunk in order.
pub fn map_chunks_mut<T, R, F>(exec: Exec, data: &mut [T], chunk: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(usize, &mut [T]) -> R + Send + Sync,
{
    match exec.effective() {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            data.par_chunks_mut(chunk)
                .enumerate()
                .map(|(i, c)| f(i, c))
                .collect()
        }
        _ => data
            .chunks_mut(chunk)
            .enumerate()
            .map(|(i, c)| f(i, c))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_paths_agree() {
        let seq = map_range(Exec::Sequential, 1000, |i| (i as f64).sqrt());
        let par = map_range(Exec::Parallel, 1000, |i| (i as f64).sqrt());
        assert_eq!(seq, par);

        let mut a: Vec<u32> = (0..100).collect();
        let mut b = a.clone();
        let sa = map_chunks_mut(Exec::Sequential, &mut a, 7, |i, c| {
            c.iter_mut().for_each(|x| *x += i as u32);
            c.len()
        });
        let sb = map_chunks_mut(Exec::Parallel, &mut b, 7, |i, c| {
            c.iter_mut().for_each(|x| *x += i as u32);
            c.len()
        });
        assert_eq!(a, b);
        assert_eq!(sa, sb);
    }
}
