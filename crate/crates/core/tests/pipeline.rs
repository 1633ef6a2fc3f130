mod common;

use common::*;
use l3cs::container::Container;
use l3cs::mixture::CDF_TOTAL;
use l3cs::*;

fn store(seed: u64) -> WeightStore {
    init_weights(&small_config(), seed).unwrap()
}

#[test]
fn roundtrip_across_sizes() {
    let s = store(11);
    for (i, (h, w)) in [(16, 16), (8, 8), (1, 1), (3, 50), (23, 9)].into_iter().enumerate() {
        let pair = random_pair(h, w, &mut rng(i as u64));
        let (c, _) = compress(&pair, &s).unwrap();
        let bytes = c.to_bytes().unwrap();
        assert_eq!(decompress(&Container::from_bytes(&bytes).unwrap(), &s).unwrap(), pair, "{h}x{w}");
    }
}

#[test]
fn deterministic_bytes() {
    let s = store(2);
    let pair = random_pair(12, 20, &mut rng(3));
    let a = compress(&pair, &s).unwrap().0.to_bytes().unwrap();
    let b = compress(&pair, &s).unwrap().0.to_bytes().unwrap();
    assert_eq!(a, b);
}

#[test]
fn encoder_and_decoder_build_the_same_tables() {
    let s = store(4);
    let pair = random_pair(16, 24, &mut rng(5));
    let opts = CodecOptions {
        tables: TableSource::Model,
        trace_tables: true,
    };
    let (c, report) = compress_with(&pair, &s, &opts).unwrap();
    let decoded = decode_with(&c, &s, &opts).unwrap();
    assert_eq!(report.table_trace.len(), report.symbols(None));
    assert_eq!(report.table_trace, decoded.table_trace);
    let evaluated = evaluate_with(&pair, &s, &opts).unwrap();
    assert_eq!(evaluated.table_trace, report.table_trace);
}

#[test]
fn left_segments_ignore_the_right_view() {
    let s = store(6);
    let mut r = rng(7);
    let a = random_pair(16, 16, &mut r);
    let b = StereoPair::new(a.left.clone(), random_image(16, 16, &mut r)).unwrap();
    let (ca, _) = compress(&a, &s).unwrap();
    let (cb, _) = compress(&b, &s).unwrap();
    let left = |c: &Container| -> Vec<Vec<u8>> {
        c.segments
            .iter()
            .filter(|seg| seg.id.view == View::Left)
            .map(|seg| seg.payload.clone())
            .collect()
    };
    assert_eq!(left(&ca), left(&cb));
    assert_ne!(ca.segments, cb.segments);
}

#[test]
fn oracle_tables_collapse_to_framing() {
    let s = store(8);
    let pair = random_pair(16, 32, &mut rng(9));
    let opts = CodecOptions {
        tables: TableSource::Oracle,
        trace_tables: false,
    };
    let (c, report) = compress_with(&pair, &s, &opts).unwrap();
    for seg in &report.segments {
        let alphabet = if seg.id.role == Role::Image { 256.0 } else { 25.0 };
        let per_symbol = (CDF_TOTAL as f64 / (CDF_TOTAL as f64 - (alphabet - 1.0))).log2();
        assert!(seg.ideal_bits <= seg.symbols as f64 * per_symbol + 1e-9);
        assert!(seg.coded_bytes.unwrap() as f64 <= 8.0 + seg.ideal_bits / 8.0);
    }
    let payload: usize = c.segments.iter().map(|s| s.payload.len()).sum();
    assert!(payload <= 8 * c.segments.len() + 8);
    assert!(decode_with(&c, &s, &opts).is_err());
}

#[test]
fn single_view_matches_left_of_duplicated_pair() {
    let s = store(10);
    let img = random_image(16, 24, &mut rng(11));
    let (single, single_report) = compress_single(&img, &s).unwrap();
    let pair = StereoPair::new(img.clone(), img.clone()).unwrap();
    let (both, both_report) = compress(&pair, &s).unwrap();
    assert_eq!(
        single_report.ideal_bpsp(Some(View::Left)),
        both_report.ideal_bpsp(Some(View::Left))
    );
    let left: Vec<_> = both.segments.iter().filter(|x| x.id.view == View::Left).cloned().collect();
    assert_eq!(single.segments, left);
    assert!(single.segments.iter().all(|x| x.id.view == View::Left));
    assert_eq!(decompress_single(&single, &s).unwrap(), img);
}

#[test]
fn uniform_bpsp_closed_form() {
    let s = store(12);
    let pair = random_pair(32, 32, &mut rng(13));
    let opts = CodecOptions {
        tables: TableSource::Uniform,
        trace_tables: false,
    };
    let report = evaluate_with(&pair, &s, &opts).unwrap();
    let feature_term = 25f64.log2() * 5.0 * (0.25 + 1.0 / 16.0 + 1.0 / 64.0) / 3.0;
    assert!((report.ideal_bpsp(None) - 8.0 - feature_term).abs() < 1e-3);
    // the 25-symbol uniform table holds counts of 2622 and 2621
    let upper = 8.0 + 5.0 * (0.25 + 1.0 / 16.0 + 1.0 / 64.0) / 3.0 * (65536f64 / 2621.0).log2();
    let lower = 8.0 + 5.0 * (0.25 + 1.0 / 16.0 + 1.0 / 64.0) / 3.0 * (65536f64 / 2622.0).log2();
    assert!(report.ideal_bpsp(None) >= lower - 1e-12 && report.ideal_bpsp(None) <= upper + 1e-12);
    let avg = (report.ideal_bpsp(Some(View::Left)) + report.ideal_bpsp(Some(View::Right))) / 2.0;
    assert!((avg - report.ideal_bpsp(None)).abs() < 1e-12);
}

#[test]
fn refusals_are_distinct() {
    let s = store(14);
    let pair = random_pair(16, 16, &mut rng(15));
    let (c, _) = compress(&pair, &s).unwrap();
    let bytes = c.to_bytes().unwrap();

    let mut flipped = bytes.clone();
    let last_payload = bytes.len() - 5;
    flipped[last_payload] ^= 0x40;
    assert!(matches!(Container::from_bytes(&flipped), Err(Error::Crc { .. })));
    assert!(matches!(
        Container::from_bytes(&bytes[..bytes.len() - 9]),
        Err(Error::Truncated(_))
    ));
    assert!(matches!(decompress(&c, &store(99)), Err(Error::DigestMismatch { .. })));

    let mut other = c.clone();
    other.header.components += 1;
    assert!(matches!(decompress(&other, &s), Err(Error::ConfigMismatch(_))));

    let mut short = c.clone();
    let last = short.segments.len() - 1;
    short.segments[last].payload.truncate(3);
    assert!(matches!(decompress(&short, &s), Err(Error::Corrupt(_))));
}

#[test]
fn evaluate_reports_quality_and_disparity() {
    let s = store(16);
    let pair = shifted_pair(24, 40, 3, &mut rng(17));
    let report = evaluate(&pair, &s).unwrap();
    let q = report.quality.as_ref().unwrap();
    assert_eq!((q.warped_right.height, q.warped_right.width), (24, 40));
    assert!(q.psnr > 0.0);
    assert!(q.ssim.is_some());
    assert_eq!(report.disparity.len(), 3);
    for (i, d) in report.disparity.iter().enumerate() {
        assert_eq!((d.height, d.width), (24usize.div_ceil(1 << i), 40usize.div_ceil(1 << i)));
        let dmax = (8 >> i) as f32;
        assert!(d.values.iter().all(|&v| (0.0..=dmax - 1.0).contains(&v)));
    }
    let decoded = decode(&compress(&pair, &s).unwrap().0, &s).unwrap();
    assert_eq!(decoded.disparity, report.disparity);
}

#[test]
fn mismatched_views_are_rejected() {
    let s = store(18);
    let mut r = rng(19);
    let pair = StereoPair {
        left: random_image(8, 8, &mut r),
        right: random_image(8, 9, &mut r),
    };
    assert!(matches!(compress(&pair, &s), Err(Error::Dimension(_))));
}
