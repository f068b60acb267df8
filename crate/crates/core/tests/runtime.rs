use std::io::{Read, Write};
use std::net::TcpStream;
use std::time::Duration;

use onestep_glm::estimators::global_estimate;
use onestep_glm::glm::{DataShard, DerivativeBundle, EstimateResult, GlmFamily, SolverConfig};
use onestep_glm::linalg::Matrix;
use onestep_glm::runtime::codec::{decode_frame, encode_frame, CodecError, FrameHeader, HEADER_LEN};
use onestep_glm::runtime::{
    error_code, run_one_step_protocol, Master, Message, RoundKind, SpawnedWorker, Worker, WorkerRequest,
    WorkerResponse, DEFAULT_TIMEOUT,
};
use onestep_glm::sharding::{make_plan, ShardingStrategy};
use onestep_glm::sim::{generate, CovariateLaw};
use onestep_glm::EstimatorKind;
use proptest::prelude::*;

fn shards(family: GlmFamily, n: usize, k: usize, seed: u64) -> Vec<DataShard> {
    let beta = match family {
        GlmFamily::Logistic => vec![0.5, -1.0, 0.8],
        GlmFamily::Poisson => vec![0.3, 0.6, -0.4],
    };
    let data = generate(family, n, &beta, CovariateLaw::StdNormal, seed).unwrap();
    make_plan(ShardingStrategy::Random, &data, k, seed).unwrap().split(&data).unwrap()
}

fn spawn_all(family: GlmFamily, parts: &[DataShard]) -> (Vec<SpawnedWorker>, Vec<String>) {
    let spawned: Vec<SpawnedWorker> = parts
        .iter()
        .map(|s| SpawnedWorker::spawn(Worker::new(family, s.clone()), "127.0.0.1:0").unwrap())
        .collect();
    let addrs = spawned.iter().map(|w| w.addr.to_string()).collect();
    (spawned, addrs)
}

#[test]
fn tcp_and_in_process_agree_bitwise() {
    for family in [GlmFamily::Logistic, GlmFamily::Poisson] {
        let parts = shards(family, 1500, 3, 11);
        let (_guards, addrs) = spawn_all(family, &parts);
        let cfg = SolverConfig::default();

        let mut local = Master::in_process(family, parts.clone()).unwrap();
        let mut remote = Master::connect(&addrs, DEFAULT_TIMEOUT).unwrap();

        let a = run_one_step_protocol(&mut local, family, 300, 5, &cfg).unwrap();
        let b = run_one_step_protocol(&mut remote, family, 300, 5, &cfg).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.estimate.beta), bits(&b.estimate.beta));
        assert_eq!(a.aggregate, b.aggregate);
        assert_eq!(a.transcript, b.transcript);

        let ga = global_estimate(&mut local, None, &cfg).unwrap();
        let gb = global_estimate(&mut remote, None, &cfg).unwrap();
        assert_eq!(bits(&ga.beta), bits(&gb.beta));
        assert_eq!(ga.iterations, gb.iterations);
    }
}

#[test]
fn one_step_transcript_shape() {
    let d = 3;
    for sizes in [(600, 2), (4000, 4)] {
        let parts = shards(GlmFamily::Logistic, sizes.0, sizes.1, 3);
        let mut m = Master::in_process(GlmFamily::Logistic, parts).unwrap();
        let out = run_one_step_protocol(&mut m, GlmFamily::Logistic, 200, 9, &SolverConfig::default()).unwrap();
        let t = &out.transcript;
        assert_eq!(t.count(RoundKind::Metadata), 1);
        assert_eq!(t.heavy_rounds(), 2);
        assert_eq!(t.count(RoundKind::PilotDraw), 1);
        assert_eq!(t.count(RoundKind::Derivatives), 1);

        // Derivative replies do not grow with the shard.
        let deriv = t.rounds.iter().find(|r| r.kind == RoundKind::Derivatives).unwrap();
        let expected = (HEADER_LEN + 8 * (d + d * d + 1) + 8) as u64;
        assert!(deriv.bytes_received.iter().all(|&b| b == expected), "{:?}", deriv.bytes_received);
        assert!(deriv.bytes_sent.iter().all(|&b| b == (HEADER_LEN + 8 * d) as u64));
    }
}

#[test]
fn global_pipeline_needs_several_rounds() {
    let parts = shards(GlmFamily::Poisson, 2000, 4, 21);
    let mut m = Master::in_process(GlmFamily::Poisson, parts).unwrap();
    let fit = global_estimate(&mut m, None, &SolverConfig::default()).unwrap();
    assert!(fit.converged);
    assert_eq!(fit.method, Some(EstimatorKind::Global));
    assert!(m.transcript().count(RoundKind::Derivatives) >= 3);
}

#[test]
fn malformed_frame_gets_error_reply_and_connection_survives() {
    let parts = shards(GlmFamily::Logistic, 300, 1, 2);
    let guard = SpawnedWorker::spawn(Worker::new(GlmFamily::Logistic, parts[0].clone()), "127.0.0.1:0").unwrap();
    let mut s = TcpStream::connect(guard.addr).unwrap();
    s.set_read_timeout(Some(Duration::from_secs(10))).unwrap();

    let read_reply = |s: &mut TcpStream| -> Message {
        let mut head = [0u8; HEADER_LEN];
        s.read_exact(&mut head).unwrap();
        let h = FrameHeader::parse(&head).unwrap();
        let mut buf = head.to_vec();
        buf.resize(HEADER_LEN + h.payload_len as usize, 0);
        s.read_exact(&mut buf[HEADER_LEN..]).unwrap();
        decode_frame(&buf).unwrap().0
    };

    // Derivatives request with a 5-byte payload: not a whole number of f64s.
    let mut bad = b"OGLM\x01\x02".to_vec();
    bad.extend_from_slice(&5u32.to_le_bytes());
    bad.extend_from_slice(&[1, 2, 3, 4, 5]);
    s.write_all(&bad).unwrap();
    match read_reply(&mut s) {
        Message::Response(WorkerResponse::Error { code, .. }) => assert_eq!(code, error_code::MALFORMED_REQUEST),
        other => panic!("expected an error reply, got {other:?}"),
    }

    s.write_all(&encode_frame(&Message::Request(WorkerRequest::ShardInfo))).unwrap();
    match read_reply(&mut s) {
        Message::Response(WorkerResponse::ShardInfo { count, dim }) => {
            assert_eq!(count, 300);
            assert_eq!(dim, 3);
        }
        other => panic!("unexpected {other:?}"),
    }

    // Wrong dimension is reported, not fatal.
    s.write_all(&encode_frame(&Message::Request(WorkerRequest::LogLik { beta: vec![0.0; 2] }))).unwrap();
    match read_reply(&mut s) {
        Message::Response(WorkerResponse::Error { code, .. }) => assert_eq!(code, error_code::DIMENSION_MISMATCH),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn truncated_and_foreign_frames() {
    let frame = encode_frame(&Message::Request(WorkerRequest::LogLik { beta: vec![1.0, 2.0] }));
    for cut in 0..frame.len() {
        assert!(matches!(decode_frame(&frame[..cut]), Err(CodecError::Incomplete { .. })));
    }
    let mut v = frame.clone();
    v[4] = 9;
    assert_eq!(decode_frame(&v).unwrap_err(), CodecError::BadVersion(9));
    let mut t = frame;
    t[5] = 0x42;
    assert_eq!(decode_frame(&t).unwrap_err(), CodecError::UnknownType(0x42));
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6..1e6f64,
        Just(0.0),
        Just(-0.0),
        Just(f64::MIN_POSITIVE),
        Just(f64::MAX),
        Just(1e-300),
    ]
}

fn vecf(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(finite(), 0..max)
}

// Coefficient payloads carry no length prefix, so d = 0 is not encodable.
fn coefs(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(finite(), 1..max)
}

fn request() -> impl Strategy<Value = WorkerRequest> {
    prop_oneof![
        (any::<u32>(), any::<u64>()).prop_map(|(n_k, seed)| WorkerRequest::PilotDraw { n_k, seed }),
        coefs(8).prop_map(|beta| WorkerRequest::Derivatives { beta }),
        coefs(8).prop_map(|beta| WorkerRequest::LogLik { beta }),
        (vecf(6), finite(), any::<u32>(), prop::collection::vec((any::<u32>(), finite()), 0..4))
            .prop_map(|(init, tol, max_iter, fixed)| WorkerRequest::LocalFit { init, tol, max_iter, fixed }),
        Just(WorkerRequest::ShardInfo),
    ]
}

fn bundle() -> impl Strategy<Value = DerivativeBundle> {
    (1usize..5).prop_flat_map(|d| {
        (prop::collection::vec(finite(), d), prop::collection::vec(finite(), d * d), finite(), any::<u64>()).prop_map(
            move |(score, info, log_lik, count)| DerivativeBundle {
                score,
                info: Matrix::from_row_major(d, info).unwrap(),
                log_lik,
                count,
            },
        )
    })
}

fn estimate() -> impl Strategy<Value = EstimateResult> {
    let kind = prop_oneof![
        Just(None),
        Just(Some(EstimatorKind::Global)),
        Just(Some(EstimatorKind::OneShot)),
        Just(Some(EstimatorKind::Csl)),
        Just(Some(EstimatorKind::Pilot)),
        Just(Some(EstimatorKind::OneStep)),
    ];
    (vecf(6), prop::option::of(finite()), any::<u32>(), any::<bool>(), finite(), kind, any::<u64>()).prop_map(
        |(beta, log_lik, iterations, converged, final_step_norm, method, capped_evaluations)| EstimateResult {
            beta,
            log_lik,
            iterations,
            converged,
            final_step_norm,
            method,
            capped_evaluations,
        },
    )
}

fn response() -> impl Strategy<Value = WorkerResponse> {
    let rows = (1u32..5, 0usize..6).prop_flat_map(|(dim, n)| {
        (
            prop::collection::vec(any::<u64>(), n),
            prop::collection::vec(finite(), n),
            prop::collection::vec(finite(), n * dim as usize),
        )
            .prop_map(move |(row_ids, y, x)| WorkerResponse::PilotRows { row_ids, y, x, dim })
    });
    prop_oneof![
        rows,
        bundle().prop_map(WorkerResponse::Derivatives),
        finite().prop_map(WorkerResponse::LogLik),
        estimate().prop_map(WorkerResponse::LocalFit),
        (any::<u64>(), any::<u32>()).prop_map(|(count, dim)| WorkerResponse::ShardInfo { count, dim }),
        (any::<u16>(), ".{0,40}").prop_map(|(code, message)| WorkerResponse::Error { code, message }),
    ]
}

fn message() -> impl Strategy<Value = Message> {
    prop_oneof![request().prop_map(Message::Request), response().prop_map(Message::Response)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn empty_coefficient_payload_is_rejected(seed in any::<u8>()) {
        let mut frame = b"OGLM\x01".to_vec();
        frame.push(if seed % 2 == 0 { 0x02 } else { 0x03 });
        frame.extend_from_slice(&0u32.to_le_bytes());
        prop_assert!(matches!(decode_frame(&frame), Err(CodecError::Malformed(_))));
    }

    #[test]
    fn frames_round_trip(msg in message(), tail in prop::collection::vec(any::<u8>(), 0..8)) {
        let mut bytes = encode_frame(&msg);
        let len = bytes.len();
        let again = encode_frame(&msg);
        prop_assert_eq!(&bytes, &again);
        bytes.extend_from_slice(&tail);
        let (back, used) = decode_frame(&bytes).unwrap();
        prop_assert_eq!(used, len);
        prop_assert_eq!(&back, &msg);
        // Re-encoding the decoded message gives the same bytes, so -0.0 and
        // every other bit pattern survive.
        prop_assert_eq!(encode_frame(&back), again);
    }

    #[test]
    fn junk_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
        let _ = decode_frame(&bytes);
        let mut framed = b"OGLM\x01".to_vec();
        framed.extend_from_slice(&bytes);
        let _ = decode_frame(&framed);
    }
}
