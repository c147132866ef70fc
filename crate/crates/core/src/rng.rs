//! Counter-based random numbers.
//!
//! Every sample dimension is a pure function of `(seed, pixel, sample, depth, dimension)`,
//! so the sample sequence does not depend on how pixels are scheduled across workers.

/// 64-bit avalanche finalizer (splitmix64 / murmur3-style mix).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn combine(h: u64, v: u64) -> u64 {
    mix64(h ^ v.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(h << 6).wrapping_add(h >> 2))
}

/// Maps the top 53 bits of `bits` to a double in `[0, 1)`.
#[inline]
pub fn to_unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Random stream bound to one path vertex of one sample of one pixel.
#[derive(Clone, Copy, Debug)]
pub struct SampleStream {
    base: u64,
}

impl SampleStream {
    pub fn new(seed: u64, pixel: u64, sample: u64, depth: u32) -> Self {
        let mut h = mix64(seed ^ 0x5851_f42d_4c95_7f2d);
        h = combine(h, pixel);
        h = combine(h, sample);
        h = combine(h, depth as u64);
        Self { base: h }
    }

    /// Uniform value in `[0, 1)` for dimension `dim`.
    #[inline]
    pub fn get(&self, dim: u32) -> f64 {
        to_unit(combine(self.base, dim as u64))
    }
}

/// Second dimension of the Sobol sequence as a 32-bit fraction.
fn sobol2(mut i: u32) -> u32 {
    let mut v = 1u32 << 31;
    let mut r = 0;
    while i != 0 {
        if i & 1 != 0 {
            r ^= v;
        }
        i >>= 1;
        v ^= v >> 1;
    }
    r
}

/// Point `sample` of a (0,2)-sequence, randomized per pixel by a digital shift.
///
/// Any aligned power-of-two run of samples covers the pixel in a stratified pattern, while
/// each single point remains uniform on `[0, 1)^2`.
pub fn pixel_jitter(seed: u64, pixel: u64, sample: u32) -> (f64, f64) {
    let shift = combine(mix64(seed ^ 0x2545_f491_4f6c_dd1d), pixel);
    let fill = combine(shift, sample as u64);
    let x = (sample.reverse_bits() ^ shift as u32) as u64;
    let y = (sobol2(sample) ^ (shift >> 32) as u32) as u64;
    // The low 21 bits only fill in below the 32-bit grid.
    let unit = |hi: u64, lo: u64| to_unit((hi << 32) | (lo & 0xffff_ffff));
    (unit(x, fill), unit(y, fill >> 32))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_jitter_is_stratified() {
        // 16 consecutive points hit each cell of a 4x4 grid exactly once.
        for start in [0u32, 16, 48] {
            let mut seen = [false; 16];
            for i in start..start + 16 {
                let (x, y) = pixel_jitter(3, 77, i);
                assert!((0.0..1.0).contains(&x) && (0.0..1.0).contains(&y));
                let cell = (x * 4.0) as usize + 4 * (y * 4.0) as usize;
                assert!(!seen[cell], "cell {cell} hit twice");
                seen[cell] = true;
            }
        }
        assert_ne!(pixel_jitter(3, 77, 0), pixel_jitter(3, 78, 0));
    }

    #[test]
    fn pixel_jitter_is_uniform_over_pixels() {
        let n = 100_000u64;
        let mut s = (0.0, 0.0);
        for p in 0..n {
            let (x, y) = pixel_jitter(9, p, 5);
            s.0 += x;
            s.1 += y;
        }
        assert!((s.0 / n as f64 - 0.5).abs() < 0.005);
        assert!((s.1 / n as f64 - 0.5).abs() < 0.005);
    }

    #[test]
    fn stream_is_pure_and_in_range() {
        let a = SampleStream::new(7, 11, 3, 1);
        let b = SampleStream::new(7, 11, 3, 1);
        for d in 0..64 {
            assert_eq!(a.get(d), b.get(d));
            assert!((0.0..1.0).contains(&a.get(d)));
        }
        assert_ne!(a.get(0), SampleStream::new(7, 11, 3, 2).get(0));
        assert_ne!(a.get(0), SampleStream::new(8, 11, 3, 1).get(0));
    }

    #[test]
    fn stream_mean_and_variance_are_uniform() {
        let n = 200_000u64;
        let (mut s, mut s2) = (0.0, 0.0);
        for i in 0..n {
            let u = SampleStream::new(1, i, 0, 0).get(0);
            s += u;
            s2 += u * u;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!((mean - 0.5).abs() < 0.005);
        assert!((var - 1.0 / 12.0).abs() < 0.002);
    }
}
