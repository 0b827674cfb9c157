//! Process-wide allocator settings for repeated full-frame runs.
//!
//! A frame allocates a few hundred megabytes of short-lived planes. By
//! default glibc serves the large ones with fresh `mmap` regions and unmaps
//! them on free, so every frame pays to fault the same memory in again.
//! Raising the mmap threshold to its ceiling and disabling heap trimming
//! keeps freed blocks in the heap for the next frame.

/// Largest mmap threshold glibc accepts on 64-bit targets.
const MMAP_THRESHOLD: i32 = 32 << 20;

/// Applies the settings. Call once, early, from a binary; a no-op where the
/// C library is not glibc.
pub fn retain_freed_memory() {
    #[cfg(all(target_os = "linux", target_env = "gnu"))]
    // SAFETY: mallopt only changes allocator parameters; it is called
    // before the process starts worker threads.
    unsafe {
        libc::mallopt(libc::M_MMAP_THRESHOLD, MMAP_THRESHOLD);
        libc::mallopt(libc::M_TRIM_THRESHOLD, i32::MAX);
        libc::mallopt(libc::M_TOP_PAD, 64 << 20);
    }
}
