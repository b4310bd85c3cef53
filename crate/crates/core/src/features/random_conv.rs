use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{FeatureMap, FeaturePair, STRIDE};
use crate::error::{Error, Result};
use crate::image::Image;

/// One 3×3 convolution layer, weights `[out][in][3][3]`.
#[derive(Debug, Clone, PartialEq)]
struct Conv3 {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
}

/// Three stride-2 3×3 convolutions with fixed Gaussian weights and ReLU,
/// then an 8×8 box pool (lo) and a further 3×3 box pool (hi). Total stride 8.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomConv {
    layers: [Conv3; 3],
}

/// A dense `channels × size × size` activation volume.
struct Volume {
    channels: usize,
    size: usize,
    data: Vec<f64>,
}

impl RandomConv {
    pub fn new(seed: u64, channels: [usize; 3]) -> Result<Self> {
        if channels.iter().any(|&c| c == 0) {
            return Err(Error::Config(format!("random-conv channels {channels:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layer = |inputs: usize, outputs: usize| {
            // He initialization
            let std = (2.0 / (9 * inputs) as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            let weights = (0..outputs * inputs * 9).map(|_| normal.sample(&mut rng)).collect();
            Conv3 {
                inputs,
                outputs,
                weights,
            }
        };
        let l1 = layer(1, channels[0]);
        let l2 = layer(channels[0], channels[1]);
        let l3 = layer(channels[1], channels[2]);
        Ok(Self {
            layers: [l1, l2, l3],
        })
    }

    pub fn embed(&self, patch: &Image) -> FeaturePair {
        let gray = patch.to_gray();
        let mut v = Volume {
            channels: 1,
            size: gray.width(),
            data: gray.data().iter().map(|p| p - 0.5).collect(),
        };
        for layer in &self.layers {
            v = layer.forward(&v);
        }
        let lo = box_pool(&v, 8);
        let hi = box_pool(&lo, 3);
        let to_map = |v: Volume| FeatureMap {
            channels: v.channels,
            height: v.size,
            width: v.size,
            stride: STRIDE as f64,
            data: v.data,
        };
        FeaturePair {
            lo: to_map(lo),
            hi: to_map(hi),
        }
    }
}

impl Conv3 {
    /// Valid stride-2 convolution followed by ReLU.
    fn forward(&self, input: &Volume) -> Volume {
        debug_assert_eq!(input.channels, self.inputs);
        let n = input.size;
        let m = (n - 3) / 2 + 1;
        let mut out = vec![0.0; self.outputs * m * m];
        for o in 0..self.outputs {
            let plane = &mut out[o * m * m..(o + 1) * m * m];
            for i in 0..self.inputs {
                let k = &self.weights[(o * self.inputs + i) * 9..(o * self.inputs + i + 1) * 9];
                let src = &input.data[i * n * n..(i + 1) * n * n];
                for y in 0..m {
                    for x in 0..m {
                        let mut acc = 0.0;
                        for dy in 0..3 {
                            let row = &src[(2 * y + dy) * n + 2 * x..];
                            acc += k[dy * 3] * row[0] + k[dy * 3 + 1] * row[1] + k[dy * 3 + 2] * row[2];
                        }
                        plane[y * m + x] += acc;
                    }
                }
            }
            for v in plane.iter_mut() {
                *v = v.max(0.0);
            }
        }
        Volume {
            channels: self.outputs,
            size: m,
            data: out,
        }
    }
}

/// Valid, stride-1 mean pool.
fn box_pool(input: &Volume, k: usize) -> Volume {
    let n = input.size;
    let m = n - k + 1;
    let area = (k * k) as f64;
    let mut data = vec![0.0; input.channels * m * m];
    for c in 0..input.channels {
        let src = &input.data[c * n * n..(c + 1) * n * n];
        for y in 0..m {
            for x in 0..m {
                let mut acc = 0.0;
                for dy in 0..k {
                    acc += src[(y + dy) * n + x..(y + dy) * n + x + k].iter().sum::<f64>();
                }
                data[(c * m + y) * m + x] = acc / area;
            }
        }
    }
    Volume {
        channels: input.channels,
        size: m,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{embed, ExtractorSpec};
    use rand::Rng;

    fn spec(seed: u64) -> ExtractorSpec {
        ExtractorSpec::RandomConv {
            seed,
            channels: [4, 8, 16],
        }
    }

    fn noise(n: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_vec(n, n, 1, (0..n * n).map(|_| rng.gen()).collect()).unwrap()
    }

    #[test]
    fn stacked_geometry() {
        let t = embed(&spec(1), &noise(127, 0)).unwrap();
        assert_eq!((t.lo.height(), t.hi.height()), (8, 6));
        let s = embed(&spec(1), &noise(255, 0)).unwrap();
        assert_eq!((s.lo.height(), s.lo.width(), s.hi.height(), s.hi.width()), (24, 24, 22, 22));
        assert_eq!(s.lo.channels(), 16);
    }

    #[test]
    fn seeded_weights_are_reproducible() {
        let img = noise(127, 5);
        assert_eq!(embed(&spec(9), &img).unwrap(), embed(&spec(9), &img).unwrap());
        assert_ne!(embed(&spec(9), &img).unwrap(), embed(&spec(10), &img).unwrap());
    }

    #[test]
    fn activations_are_non_negative_and_finite() {
        let s = embed(&spec(2), &noise(255, 1)).unwrap();
        assert!(s.lo.data().iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn zero_channels_rejected() {
        assert!(RandomConv::new(0, [4, 0, 8]).is_err());
    }
}
