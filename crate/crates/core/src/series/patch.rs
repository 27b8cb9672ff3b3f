use crate::error::{Error, Result};

/// A sequence chunked into fixed-length patches, left-padded so the most
/// recent element always ends the final patch.
#[derive(Debug, Clone, PartialEq)]
pub struct Patched<T> {
    pub patch_len: usize,
    pub num_patches: usize,
    /// Number of leading pad slots (all in the first patch).
    pub n_pad: usize,
    /// Row-major `(num_patches, patch_len)`.
    pub data: Vec<T>,
}

impl<T: Copy> Patched<T> {
    pub fn patch(&self, i: usize) -> &[T] {
        &self.data[i * self.patch_len..(i + 1) * self.patch_len]
    }

    pub fn is_pad(&self, i: usize, j: usize) -> bool {
        i * self.patch_len + j < self.n_pad
    }

    /// Index into the original sequence of slot `(i, j)`, or `None` for pad slots.
    pub fn source_index(&self, i: usize, j: usize) -> Option<usize> {
        (i * self.patch_len + j).checked_sub(self.n_pad)
    }

    /// Original index of the last element of patch `i`.
    pub fn patch_end(&self, i: usize) -> usize {
        (i + 1) * self.patch_len - 1 - self.n_pad
    }
}

/// Chunks `seq` into patches of `patch_len`, left-padding with `fill`.
pub fn patchify<T: Copy>(seq: &[T], patch_len: usize, fill: T) -> Result<Patched<T>> {
    if patch_len == 0 {
        return Err(Error::InvalidArgument("patch_len must be >= 1".into()));
    }
    if seq.is_empty() {
        return Err(Error::EmptySeries);
    }
    let num_patches = seq.len().div_ceil(patch_len);
    let n_pad = num_patches * patch_len - seq.len();
    let mut data = Vec::with_capacity(num_patches * patch_len);
    data.extend(std::iter::repeat_n(fill, n_pad));
    data.extend_from_slice(seq);
    Ok(Patched { patch_len, num_patches, n_pad, data })
}

/// Flattens patches back into the original sequence, dropping pad slots.
pub fn unpatchify<T: Copy>(patched: &Patched<T>) -> Vec<T> {
    patched.data[patched.n_pad..].to_vec()
}
