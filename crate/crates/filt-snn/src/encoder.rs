//! Gaussian temporal encoding of pixel intensities into first-spike
//! latencies: bright pixels spike early, dim pixels not at all.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuron::SpikeTrain;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderParams {
    /// Encoding horizon (ms).
    pub t_max: f64,
    /// Breadth of the sensitivity curve.
    pub sigma: f64,
    /// Pixels below this normalized intensity stay silent.
    pub p_t: f64,
}

impl Default for EncoderParams {
    fn default() -> Self {
        EncoderParams {
            t_max: 10.0,
            sigma: 0.5,
            p_t: 0.5,
        }
    }
}

impl EncoderParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::config(format!("encoder t_max must be positive, got {}", self.t_max)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::config(format!("encoder sigma must be positive, got {}", self.sigma)));
        }
        if !(0.0..=1.0).contains(&self.p_t) {
            return Err(Error::config(format!("encoder p_t must lie in [0, 1], got {}", self.p_t)));
        }
        Ok(())
    }

    /// Latest time any pixel can spike: the latency of a pixel exactly at
    /// the threshold intensity.
    pub fn max_delay(&self) -> f64 {
        let d = self.p_t - 1.0;
        self.t_max * (1.0 - (-d * d / (2.0 * self.sigma * self.sigma)).exp())
    }
}

/// One encoded image: an optional first-spike time per input channel, plus
/// the class label.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSample {
    pub spike_times: Vec<Option<f64>>,
    pub label: u8,
}

impl EncodedSample {
    pub fn channels(&self) -> usize {
        self.spike_times.len()
    }

    /// Channel-wise spike trains (each empty or a single spike).
    pub fn trains(&self) -> Vec<SpikeTrain> {
        self.spike_times
            .iter()
            .map(|t| match t {
                Some(t) => SpikeTrain::new(vec![*t]).expect("encoded times are finite and nonnegative"),
                None => SpikeTrain::empty(),
            })
            .collect()
    }
}

/// Latency of one normalized pixel, or None below the intensity threshold.
pub fn encode_pixel(p: f64, params: &EncoderParams) -> Result<Option<f64>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::data(format!("pixel value must lie in [0, 1], got {p}")));
    }
    if p < params.p_t {
        return Ok(None);
    }
    let d = p - 1.0;
    Ok(Some(params.t_max * (1.0 - (-d * d / (2.0 * params.sigma * params.sigma)).exp())))
}

/// Encode a 28x28 image, row-major, one channel per pixel. Raw byte values
/// are normalized by 255.
pub fn encode_image(pixels: &[u8], label: u8, params: &EncoderParams) -> Result<EncodedSample> {
    if pixels.len() != 784 {
        return Err(Error::data(format!("expected 784 pixels, got {}", pixels.len())));
    }
    let spike_times = pixels
        .iter()
        .map(|&v| encode_pixel(v as f64 / 255.0, params).expect("normalized byte is in range"))
        .collect();
    Ok(EncodedSample { spike_times, label })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> EncoderParams {
        EncoderParams::default()
    }

    #[test]
    fn full_intensity_spikes_immediately() {
        assert_eq!(encode_pixel(1.0, &params()).unwrap(), Some(0.0));
    }

    #[test]
    fn threshold_pixel_matches_closed_form() {
        let t = encode_pixel(0.5, &params()).unwrap().unwrap();
        let expect = 10.0 * (1.0 - (-0.5f64).exp());
        assert!((t - expect).abs() < 1e-12);
        assert!((t - 3.9347).abs() < 1e-4);
    }

    #[test]
    fn below_threshold_is_silent_and_ties_spike() {
        assert_eq!(encode_pixel(0.49, &params()).unwrap(), None);
        assert!(encode_pixel(0.5, &params()).unwrap().is_some());
    }

    #[test]
    fn out_of_range_pixels_are_rejected() {
        assert!(encode_pixel(-0.01, &params()).is_err());
        assert!(encode_pixel(1.01, &params()).is_err());
        assert!(encode_pixel(f64::NAN, &params()).is_err());
    }

    #[test]
    fn latency_is_monotone_nonincreasing_in_intensity() {
        let mut prev = f64::INFINITY;
        for k in 0..=500 {
            let p = 0.5 + 0.001 * k as f64;
            let t = encode_pixel(p, &params()).unwrap().unwrap();
            assert!(t <= prev + 1e-15, "p={p}");
            prev = t;
        }
    }

    #[test]
    fn all_latencies_bounded_by_max_delay() {
        let bound = params().max_delay();
        assert!(bound < 4.0);
        for v in 0u16..=255 {
            if let Some(t) = encode_pixel(v as f64 / 255.0, &params()).unwrap() {
                assert!((0.0..=bound + 1e-12).contains(&t));
            }
        }
    }

    #[test]
    fn encode_image_applies_encode_pixel_per_channel() {
        let mut pixels = [0u8; 784];
        pixels[3] = 255;
        pixels[700] = 128;
        let sample = encode_image(&pixels, 7, &params()).unwrap();
        assert_eq!(sample.label, 7);
        assert_eq!(sample.channels(), 784);
        for (i, t) in sample.spike_times.iter().enumerate() {
            let direct = encode_pixel(pixels[i] as f64 / 255.0, &params()).unwrap();
            assert_eq!(*t, direct, "channel {i}");
        }
        let spiking: Vec<usize> = sample
            .spike_times
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.map(|_| i))
            .collect();
        assert_eq!(spiking, vec![3, 700]);
        assert_eq!(sample.spike_times[3], Some(0.0));
        let t128 = sample.spike_times[700].unwrap();
        let p: f64 = 128.0 / 255.0;
        let oracle = 10.0 * (1.0 - (-(p - 1.0) * (p - 1.0) / 0.5).exp());
        assert!((t128 - oracle).abs() < 1e-12);
        assert!(t128 > 3.9 && t128 < params().max_delay());
    }

    #[test]
    fn blank_and_saturated_images_are_uniform() {
        let blank = encode_image(&[0u8; 784], 0, &params()).unwrap();
        assert!(blank.spike_times.iter().all(|t| t.is_none()));
        let bright = encode_image(&[255u8; 784], 0, &params()).unwrap();
        assert!(bright.spike_times.iter().all(|&t| t == Some(0.0)));
    }

    #[test]
    fn wrong_pixel_count_is_rejected() {
        assert!(encode_image(&[0u8; 100], 0, &params()).is_err());
    }

    #[test]
    fn trains_mirror_spike_times() {
        let mut pixels = [0u8; 784];
        pixels[0] = 200;
        let sample = encode_image(&pixels, 1, &params()).unwrap();
        let trains = sample.trains();
        assert_eq!(trains.len(), 784);
        assert_eq!(trains[0].first(), sample.spike_times[0]);
        assert!(trains[1].is_empty());
    }
}
