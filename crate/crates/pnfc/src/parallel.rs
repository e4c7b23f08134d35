//! Data-parallel helpers with a sequential fallback.
//!
//! The hot loops (frame synthesis, per-pixel correlation maps) are expressed
//! as independent chunks of work. With the default `parallel` feature they run
//! on the rayon pool; without it the same closures run in a plain loop. Both
//! paths visit items in a fixed order per chunk, so results are byte-identical
//! either way. The `*_seq` entry points below always run sequentially even in
//! a parallel build, which is what the benchmark suite compares against.

use crate::error::Result;

/// Caps the worker pool at `n` threads for the rest of the process. Must run
/// before any parallel work; later calls fail. A no-op (always `Ok`) in
/// sequential builds, where there is one worker regardless.
pub fn set_threads(n: usize) -> Result<()> {
    #[cfg(feature = "parallel")]
    {
        use crate::error::Error;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::argument(format!("thread pool already started: {e}")))?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

/// Fills `out` by calling `f(index, slot)` for every element, in parallel when
/// the `parallel` feature is enabled.
pub fn fill_indexed<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        out.par_iter_mut().enumerate().for_each(|(i, slot)| f(i, slot));
    }
    #[cfg(not(feature = "parallel"))]
    fill_indexed_seq(out, f);
}

/// Sequential twin of [`fill_indexed`]; available in every build.
pub fn fill_indexed_seq<T, F>(out: &mut [T], f: F)
where
    F: Fn(usize, &mut T),
{
    for (i, slot) in out.iter_mut().enumerate() {
        f(i, slot);
    }
}

/// Maps `0..n` through `f`, preserving order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    map_indexed_seq(n, f)
}

/// Sequential twin of [`map_indexed`].
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
