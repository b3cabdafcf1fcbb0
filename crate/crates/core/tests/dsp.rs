use std::f64::consts::PI;

use baomi::dsp::{load_wav, pad_to_max, write_wav, AudioClip, CepstralExtractor, CepstralKind, SpectralConfig};
use proptest::prelude::*;

const RATE: u32 = 4000;

fn extractor(kind: CepstralKind) -> CepstralExtractor {
    CepstralExtractor::new(kind, &SpectralConfig::default(), RATE).unwrap()
}

fn tone(freq: f64, n: usize) -> Vec<f32> {
    (0..n)
        .map(|i| (2.0 * PI * freq * i as f64 / RATE as f64).sin() as f32)
        .collect()
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |best, i| if v[i] > v[best] { i } else { best })
}

#[test]
fn single_bin_spectrum_peaks_in_containing_filter() {
    for kind in [CepstralKind::Mfcc, CepstralKind::Lfcc] {
        let ex = extractor(kind);
        let fb = ex.filterbank();
        for bin in 1..fb.n_bins() - 1 {
            let mut spectrum = vec![0.0; fb.n_bins()];
            spectrum[bin] = 1.0;
            let m = argmax(&fb.apply(&spectrum));
            let f = bin as f64 * fb.bin_hz();
            let (lo, _, hi) = fb.edges(m);
            assert!(lo < f && f < hi, "{kind:?} bin {bin} ({f} Hz) peaked in filter {m} [{lo}, {hi}]");
        }
    }
}

/// Filterbank energies of one Hann-windowed frame from a direct DFT and
/// independently built triangular filters.
fn oracle_energies(frame: &[f32], fft_size: usize, n_filters: usize, mel: bool) -> (Vec<f64>, Vec<f64>) {
    let n = frame.len();
    let to_scale = |f: f64| if mel { 2595.0 * (1.0 + f / 700.0).log10() } else { f };
    let from_scale = |m: f64| if mel { 700.0 * (10f64.powf(m / 2595.0) - 1.0) } else { m };
    let top = to_scale(RATE as f64 / 2.0);
    let edges: Vec<f64> = (0..n_filters + 2)
        .map(|i| from_scale(top * i as f64 / (n_filters + 1) as f64))
        .collect();
    let spectrum: Vec<f64> = (0..=fft_size / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &x) in frame.iter().enumerate() {
                let w = 0.5 - 0.5 * (2.0 * PI * t as f64 / n as f64).cos();
                let ph = -2.0 * PI * (k * t) as f64 / fft_size as f64;
                re += w * x as f64 * ph.cos();
                im += w * x as f64 * ph.sin();
            }
            (re * re + im * im).sqrt()
        })
        .collect();
    let energies = (0..n_filters)
        .map(|m| {
            let (lo, c, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            spectrum
                .iter()
                .enumerate()
                .map(|(k, &mag)| {
                    let f = k as f64 * RATE as f64 / fft_size as f64;
                    let w = ((f - lo) / (c - lo)).min((hi - f) / (hi - c)).max(0.0);
                    w * mag
                })
                .sum()
        })
        .collect();
    (energies, edges)
}

#[test]
fn filterbank_energies_match_direct_dft() {
    for (kind, mel) in [(CepstralKind::Mfcc, true), (CepstralKind::Lfcc, false)] {
        let ex = extractor(kind);
        for f in [97.0, 440.0, 1234.5] {
            let frame = tone(f, ex.frame_samples());
            let (expect, _) = oracle_energies(&frame, ex.fft_size(), ex.filterbank().n_filters(), mel);
            for (a, b) in ex.filterbank_energies(&frame).iter().zip(&expect) {
                assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "{kind:?} {f} Hz: {a} vs {b}");
            }
        }
    }
}

#[test]
fn tone_440_peaks_at_nearest_mel_center() {
    let ex = extractor(CepstralKind::Mfcc);
    let e = ex.filterbank_energies(&tone(440.0, ex.frame_samples()));
    let nearest = (0..e.len())
        .min_by(|&a, &b| {
            let da = (ex.filterbank().edges(a).1 - 440.0).abs();
            let db = (ex.filterbank().edges(b).1 - 440.0).abs();
            da.partial_cmp(&db).unwrap()
        })
        .unwrap();
    assert_eq!(argmax(&e), nearest);
    assert_eq!(nearest, 46);
}

#[test]
fn windowed_tone_peaks_in_containing_filter() {
    // A 25 ms Hann frame smears a tone over roughly ±80 Hz. Linear filters
    // are wider than that everywhere; mel filters only from about 560 Hz up,
    // below which the peak can land one filter over.
    for (kind, start) in [(CepstralKind::Lfcc, 30.0), (CepstralKind::Mfcc, 560.0)] {
        let ex = extractor(kind);
        let mut f = start;
        while f < 1950.0 {
            let e = ex.filterbank_energies(&tone(f, ex.frame_samples()));
            let m = argmax(&e);
            let (lo, _, hi) = ex.filterbank().edges(m);
            assert!(lo < f && f < hi, "{kind:?} {f} Hz peaked in filter {m} [{lo}, {hi}]");
            f += 3.0;
        }
    }
}

#[test]
fn output_dimensions() {
    let clip = AudioClip::new("t", RATE, tone(300.0, 8000)).unwrap();
    assert_eq!(extractor(CepstralKind::Mfcc).extract(&clip).unwrap().len(), 40);
    assert_eq!(extractor(CepstralKind::Lfcc).extract(&clip).unwrap().len(), 14);
}

#[test]
fn repeating_a_hop_periodic_clip_keeps_features() {
    // 100 Hz at 4 kHz repeats every 40 samples, exactly one hop.
    let one = tone(100.0, 4000);
    let mut two = one.clone();
    two.extend_from_slice(&one);
    let a = AudioClip::new("a", RATE, one).unwrap();
    let b = AudioClip::new("b", RATE, two).unwrap();
    for kind in [CepstralKind::Mfcc, CepstralKind::Lfcc] {
        let ex = extractor(kind);
        for (x, y) in ex.extract(&a).unwrap().iter().zip(ex.extract(&b).unwrap()) {
            assert!((x - y).abs() < 1e-9, "{kind:?}: {x} vs {y}");
        }
    }
}

#[test]
fn frame_geometry() {
    let ex = extractor(CepstralKind::Mfcc);
    assert_eq!((ex.frame_samples(), ex.hop_samples()), (100, 40));
    assert_eq!(ex.frame_count(100), 1);
    assert_eq!(ex.frame_count(139), 1);
    assert_eq!(ex.frame_count(140), 2);
    // 5 s and 65 s at 4 kHz.
    assert_eq!(ex.frame_count(20_000), 498);
    assert_eq!(ex.frame_count(260_000), 6498);
}

#[test]
fn padding_over_recording_durations() {
    let secs = [5.0, 12.5, 30.0, 64.9, 65.0];
    let clips: Vec<AudioClip> = secs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let n = (s * RATE as f64) as usize;
            AudioClip::new(format!("r{i}"), RATE, tone(100.0 + 50.0 * i as f64, n)).unwrap()
        })
        .collect();
    let padded = pad_to_max(&clips).unwrap();
    let max = 65 * RATE as usize;
    for (orig, p) in clips.iter().zip(&padded) {
        assert_eq!(p.len(), max);
        assert_eq!(p.recording_id, orig.recording_id);
        assert_eq!(&p.samples[..orig.len()], &orig.samples[..]);
        assert!(p.samples[orig.len()..].iter().all(|&s| s == 0.0));
    }
    assert_eq!(pad_to_max(&padded).unwrap(), padded);

    let ex = extractor(CepstralKind::Lfcc);
    let feats: Vec<Vec<f64>> = ex.extract_all(&padded).into_iter().map(Result::unwrap).collect();
    assert!(feats.iter().all(|f| f.len() == 14 && f.iter().all(|v| v.is_finite())));
}

#[test]
fn wav_round_trip_at_16_bits() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rec_17.wav");
    let clip = AudioClip::new("x", RATE, tone(250.0, 4000).iter().map(|s| s * 0.5).collect()).unwrap();
    write_wav(&path, &clip).unwrap();
    let back = load_wav(&path).unwrap();
    assert_eq!(back.recording_id, "rec_17");
    assert_eq!(back.sample_rate_hz, RATE);
    for (a, b) in clip.samples.iter().zip(&back.samples) {
        assert!((a - b).abs() <= 1.0 / 32768.0);
    }
}

#[test]
fn silence_hits_the_log_floor_not_infinity() {
    let clip = AudioClip::new("z", RATE, vec![0.0; 4000]).unwrap();
    for kind in [CepstralKind::Mfcc, CepstralKind::Lfcc] {
        let v = extractor(kind).extract(&clip).unwrap();
        assert!(v.iter().all(|x| x.is_finite()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn features_are_finite_and_sized(samples in prop::collection::vec(-1.0f32..1.0, 100..2000)) {
        let clip = AudioClip::new("p", RATE, samples).unwrap();
        let v = extractor(CepstralKind::Mfcc).extract(&clip).unwrap();
        prop_assert_eq!(v.len(), 40);
        prop_assert!(v.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn padding_keeps_prefix(lens in prop::collection::vec(1usize..500, 1..6)) {
        let clips: Vec<AudioClip> = lens
            .iter()
            .enumerate()
            .map(|(i, &n)| AudioClip::new(format!("c{i}"), RATE, vec![0.25; n]).unwrap())
            .collect();
        let padded = pad_to_max(&clips).unwrap();
        let max = *lens.iter().max().unwrap();
        for (c, p) in clips.iter().zip(&padded) {
            prop_assert_eq!(p.len(), max);
            prop_assert_eq!(&p.samples[..c.len()], &c.samples[..]);
        }
    }
}
