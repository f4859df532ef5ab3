use std::fs;
use std::io::Write;

use l2e_core::gen::{gen_dump, GenDumpSpec};
use l2e_core::io::{read_dump, DumpHeader, DumpReader, DumpWriter, LoadedDump, RunConfig};
use l2e_core::Error;
use proptest::prelude::*;

fn write_all(header: DumpHeader, records: &[(usize, Vec<f32>)]) -> Vec<u8> {
    let mut w = DumpWriter::new(Vec::new(), header).unwrap();
    for (l, v) in records {
        w.write_record(*l, v).unwrap();
    }
    w.finish().unwrap()
}

type Records = Vec<(usize, Vec<f32>)>;

fn dump_strategy() -> impl Strategy<Value = (Vec<String>, usize, Records)> {
    (1usize..5, 1usize..8).prop_flat_map(|(nf, nn)| {
        (
            prop::collection::vec("[a-z ]{0,6}", nf),
            Just(nn),
            prop::collection::vec((0..nf, prop::collection::vec(any::<f32>(), nn)), 0..30),
        )
    })
}

proptest! {
    #[test]
    fn write_read_write_is_byte_identical((names, nn, records) in dump_strategy()) {
        let header = DumpHeader::new(nn, names).unwrap();
        let bytes = write_all(header.clone(), &records);
        let reader = DumpReader::new(bytes.as_slice()).unwrap();
        prop_assert_eq!(reader.header(), &header);
        let back: Vec<(usize, Vec<f32>)> = reader.collect::<Result<_, _>>().unwrap();
        prop_assert_eq!(back.len(), records.len());
        for ((la, va), (lb, vb)) in back.iter().zip(&records) {
            prop_assert_eq!(la, lb);
            // bitwise, so NaN payloads count too
            prop_assert!(va.iter().zip(vb).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
        prop_assert_eq!(write_all(header, &back), bytes);
    }
}

#[test]
fn file_round_trip_and_record_count() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.l2ea");
    let spec = GenDumpSpec {
        n_records: 123,
        ..Default::default()
    };
    let (w, _) = gen_dump(&spec, fs::File::create(&path).unwrap()).unwrap();
    drop(w);
    let r = read_dump(&path).unwrap();
    assert_eq!(r.record_count(), Some(123));
    let loaded = LoadedDump::load(&path).unwrap();
    assert_eq!(loaded.labels.len(), 123);
    assert_eq!(loaded.activations.n_neurons, 64);

    let mut again = DumpWriter::new(Vec::new(), loaded.header.clone()).unwrap();
    for rec in read_dump(&path).unwrap() {
        let (l, v) = rec.unwrap();
        again.write_record(l, &v).unwrap();
    }
    assert_eq!(again.finish().unwrap(), fs::read(&path).unwrap());
}

#[test]
fn corrupt_files_report_their_kind() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_all(
        DumpHeader::new(3, vec!["x".into(), "y".into()]).unwrap(),
        &[(0, vec![1.0, 2.0, 3.0]), (1, vec![4.0, 5.0, 6.0])],
    );

    let bad_magic = dir.path().join("magic");
    let mut b = good.clone();
    b[..4].copy_from_slice(b"NOPE");
    fs::write(&bad_magic, &b).unwrap();
    let e = read_dump(&bad_magic).err().unwrap();
    assert_eq!(e.kind(), "format-error");

    let short = dir.path().join("short");
    fs::write(&short, &good[..good.len() - 5]).unwrap();
    let mut r = read_dump(&short).unwrap();
    assert_eq!(r.record_count(), Some(1));
    assert!(r.next().unwrap().is_ok());
    let e = r.next().unwrap().unwrap_err();
    assert!(matches!(e, Error::Truncation { record: 1, .. }));
    assert_eq!(e.kind(), "truncation-error");
    assert!(LoadedDump::load(&short).is_err());

    let label = dir.path().join("label");
    let mut b = good.clone();
    let first_record = b.len() - 2 * 16;
    b[first_record] = 2;
    fs::write(&label, &b).unwrap();
    let e = LoadedDump::load(&label).unwrap_err();
    assert_eq!(e.kind(), "validation-error");

    let empty = dir.path().join("empty");
    fs::write(&empty, b"").unwrap();
    assert_eq!(read_dump(&empty).err().unwrap().kind(), "format-error");
}

#[test]
fn natural_language_shape_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nl.l2ea");
    let spec = GenDumpSpec {
        n_features: 9,
        n_records: 28_084,
        mono: 51,
        background: 461,
        seed: 2,
        ..Default::default()
    };
    let (w, bindings) = gen_dump(&spec, std::io::BufWriter::new(fs::File::create(&path).unwrap())).unwrap();
    drop(w);
    assert_eq!(bindings.len(), 512);
    let header = DumpHeader::new(512, (0..9).map(|f| format!("feature_{f}")).collect()).unwrap();
    let size = fs::metadata(&path).unwrap().len() as usize;
    assert_eq!(size, header.encoded_len() + 28_084 * header.record_size());
    let mut r = read_dump(&path).unwrap();
    assert_eq!(r.record_count(), Some(28_084));
    let mut v = Vec::new();
    let mut seen = [0usize; 9];
    while let Some(l) = r.next_into(&mut v).unwrap() {
        assert_eq!(v.len(), 512);
        seen[l] += 1;
    }
    assert_eq!(seen.iter().sum::<usize>(), 28_084);
    assert!(seen.iter().all(|&c| c > 2500));
}

#[test]
fn streams_a_million_records() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.l2ea");
    let header = DumpHeader::new(4, vec!["a".into(), "b".into(), "c".into()]).unwrap();
    let mut w = DumpWriter::create(&path, header).unwrap();
    for i in 0..1_000_000u32 {
        let x = i as f32;
        w.write_record((i % 3) as usize, &[x, -x, 0.5, x * 0.25]).unwrap();
    }
    w.finish().unwrap().flush().unwrap();

    // one reusable record buffer: memory stays flat regardless of file size
    let mut r = read_dump(&path).unwrap();
    let mut v = Vec::with_capacity(4);
    let (mut n, mut sum) = (0u64, 0f64);
    while let Some(l) = r.next_into(&mut v).unwrap() {
        assert_eq!(l as u64, n % 3);
        sum += v[0] as f64;
        n += 1;
    }
    assert_eq!(n, 1_000_000);
    assert!(v.capacity() <= 8);
    assert_eq!(sum, (0..1_000_000u64).map(|i| i as f32 as f64).sum::<f64>());
}

#[test]
fn config_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    fs::write(&path, r#"{"seed": 7, "train": {"epochs": 3}, "output": {"dir": "out"}}"#).unwrap();
    let c = RunConfig::load(&path).unwrap();
    assert_eq!((c.seed, c.train.epochs), (7, 3));
    let snap = c.snapshot().unwrap();
    let text = serde_json::to_string(&snap).unwrap();
    let back = RunConfig::from_json(&text).unwrap();
    assert_eq!(back, snap);
    assert_eq!(back.hash().unwrap(), c.hash().unwrap());

    fs::write(&path, r#"{"seed": 7, "extra": true}"#).unwrap();
    assert_eq!(RunConfig::load(&path).unwrap_err().kind(), "config-error");
}
