use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::ptr;

use gloss::{train, EncodedCorpus, ModelKind, TrainConfig, Vocab};
use gloss_ffi::*;

const LINES: [&str; 5] = [
    "the cat sat on the mat",
    "a dog ran in the park",
    "birds sing at dawn",
    "the market opened higher today",
    "rain is expected tomorrow",
];

fn saved_model(dir: &Path, kind: ModelKind) -> PathBuf {
    let vocab = Vocab::build(&LINES, 1).unwrap();
    let corpus = EncodedCorpus::encode(&LINES, &vocab, 8).unwrap();
    let cfg = TrainConfig {
        kind,
        dim: 6,
        lr: 0.05,
        epochs: 10,
        batch_size: 2,
        max_len: 8,
        ..TrainConfig::default()
    };
    let (model, _) = train(vocab, &corpus, cfg).unwrap();
    let path = dir.join(format!("{}.glos", kind.as_str()));
    gloss::persistence::save(&model, &path).unwrap();
    path
}

fn c_path(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn load(path: &Path) -> *mut GlossModel {
    let mut handle = ptr::null_mut();
    let status = unsafe { gloss_model_load(c_path(path).as_ptr(), &mut handle) };
    assert_eq!(status, GlossStatus::Ok);
    assert!(!handle.is_null());
    handle
}

fn last_error() -> String {
    let p = gloss_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn load_and_query_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let m = load(&saved_model(dir.path(), ModelKind::Pos));
    unsafe {
        assert_eq!(gloss_model_dim(m), 6);
        assert_eq!(gloss_model_kind(m), 1);
        assert_eq!(gloss_model_num_latents(m), LINES.len());
        assert_eq!(gloss_model_radius(m), 2.0);
        assert!(gloss_model_vocab_size(m) > 10);
        gloss_model_free(m);
        assert_eq!(gloss_model_dim(ptr::null()), 0);
        assert_eq!(gloss_model_kind(ptr::null()), -1);
        gloss_model_free(ptr::null_mut());
    }
}

#[test]
fn embed_matches_core_library() {
    let dir = tempfile::tempdir().unwrap();
    let path = saved_model(dir.path(), ModelKind::Bow);
    let m = load(&path);
    let sentence = CString::new("the cat sat").unwrap();
    let mut z = [0.0f64; 6];
    let status = unsafe { gloss_embed(m, sentence.as_ptr(), 50, 1.0, 0, z.as_mut_ptr(), z.len()) };
    assert_eq!(status, GlossStatus::Ok);

    let core = gloss::persistence::load(&path).unwrap();
    let opts = gloss::InferOptions {
        steps: 50,
        ..Default::default()
    };
    assert_eq!(
        z.to_vec(),
        gloss::infer_latent(&core, "the cat sat", &opts).unwrap()
    );

    let mut small = [0.0f64; 3];
    let status = unsafe {
        gloss_embed(
            m,
            sentence.as_ptr(),
            5,
            1.0,
            0,
            small.as_mut_ptr(),
            small.len(),
        )
    };
    assert_eq!(status, GlossStatus::BufferTooSmall);
    assert!(last_error().contains("need 6"));
    unsafe { gloss_model_free(m) };
}

#[test]
fn cosine_and_interpolate() {
    let dir = tempfile::tempdir().unwrap();
    let m = load(&saved_model(dir.path(), ModelKind::Pos));
    let a = [2.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let b = [0.0, 2.0, 0.0, 0.0, 0.0, 0.0];
    let mut c = 0.0;
    unsafe {
        assert_eq!(
            gloss_cosine(a.as_ptr(), a.as_ptr(), 6, &mut c),
            GlossStatus::Ok
        );
        assert!((c - 1.0).abs() < 1e-15);
        assert_eq!(
            gloss_cosine(a.as_ptr(), b.as_ptr(), 6, &mut c),
            GlossStatus::Ok
        );
        assert_eq!(c, 0.0);
        let zero = [0.0; 6];
        assert_eq!(
            gloss_cosine(a.as_ptr(), zero.as_ptr(), 6, &mut c),
            GlossStatus::InvalidArgument
        );

        let mut mid = [0.0; 6];
        assert_eq!(
            gloss_interpolate(m, a.as_ptr(), b.as_ptr(), 0.5, mid.as_mut_ptr()),
            GlossStatus::Ok
        );
        assert_eq!(mid[..2], [1.0, 1.0]);
        assert_eq!(
            gloss_interpolate(m, a.as_ptr(), b.as_ptr(), 0.0, mid.as_mut_ptr()),
            GlossStatus::Ok
        );
        assert_eq!(mid, a);
        assert_eq!(
            gloss_interpolate(m, a.as_ptr(), b.as_ptr(), 2.0, mid.as_mut_ptr()),
            GlossStatus::InvalidArgument
        );
        gloss_model_free(m);
    }
}

#[test]
fn greedy_decode_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = saved_model(dir.path(), ModelKind::Pos);
    let m = load(&path);
    let mut z = [0.0f64; 6];
    let mut text: *mut c_char = ptr::null_mut();
    unsafe {
        assert_eq!(
            gloss_model_latent(m, 0, z.as_mut_ptr(), z.len()),
            GlossStatus::Ok
        );
        assert_eq!(
            gloss_greedy_decode(m, z.as_ptr(), 6, &mut text),
            GlossStatus::Ok
        );
        let got = CStr::from_ptr(text).to_str().unwrap().to_string();
        gloss_string_free(text);

        let core = gloss::persistence::load(&path).unwrap();
        assert_eq!(got, gloss::genlab::greedy_text(&core, &z, 6).unwrap());
        assert_eq!(got.split(' ').count(), 6);

        assert_eq!(
            gloss_greedy_decode(m, z.as_ptr(), 0, &mut text),
            GlossStatus::InvalidArgument
        );
        assert_eq!(
            gloss_model_latent(m, 99, z.as_mut_ptr(), z.len()),
            GlossStatus::InvalidArgument
        );
        gloss_model_free(m);
    }

    let bow = load(&saved_model(dir.path(), ModelKind::Bow));
    unsafe {
        assert_eq!(
            gloss_greedy_decode(bow, z.as_ptr(), 3, &mut text),
            GlossStatus::NotPositional
        );
        assert_eq!(last_error(), "generation requires positional model");
        gloss_model_free(bow);
    }
}

#[test]
fn save_reproduces_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = saved_model(dir.path(), ModelKind::Bow);
    let m = load(&path);
    let copy = dir.path().join("copy.glos");
    unsafe {
        assert_eq!(gloss_model_save(m, c_path(&copy).as_ptr()), GlossStatus::Ok);
        gloss_model_free(m);
    }
    assert_eq!(std::fs::read(path).unwrap(), std::fs::read(copy).unwrap());
}

#[test]
fn errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let mut handle = ptr::null_mut();
    unsafe {
        let missing = c_path(&dir.path().join("missing.glos"));
        assert_eq!(
            gloss_model_load(missing.as_ptr(), &mut handle),
            GlossStatus::Io
        );
        assert!(last_error().contains("missing.glos"));
        assert!(handle.is_null());

        let junk = dir.path().join("junk.glos");
        std::fs::write(&junk, b"XXXXXXXXXXXX").unwrap();
        assert_eq!(
            gloss_model_load(c_path(&junk).as_ptr(), &mut handle),
            GlossStatus::BadFormat
        );
        assert_eq!(last_error(), "bad magic/version");

        assert_eq!(
            gloss_model_load(ptr::null(), &mut handle),
            GlossStatus::NullPointer
        );
        let bad_utf8 = [0xffu8 as c_char, 0];
        assert_eq!(
            gloss_model_load(bad_utf8.as_ptr(), &mut handle),
            GlossStatus::InvalidUtf8
        );

        let mut z = [0.0; 6];
        let s = CString::new("x").unwrap();
        assert_eq!(
            gloss_embed(ptr::null(), s.as_ptr(), 1, 1.0, 0, z.as_mut_ptr(), 6),
            GlossStatus::NullPointer
        );
    }
    let m = load(&saved_model(dir.path(), ModelKind::Bow));
    assert!(gloss_last_error().is_null());
    unsafe { gloss_model_free(m) };
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/gloss.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "gloss_model_load",
        "gloss_embed",
        "gloss_greedy_decode",
        "gloss_last_error",
        "GLOSS_STATUS_OK",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        "#include \"gloss.h\"\nint main(void) { return GLOSS_STATUS_OK; }\n",
    )
    .unwrap();
    let Ok(status) = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .status()
    else {
        eprintln!("no C compiler found; header syntax not checked");
        return;
    };
    assert!(status.success());
}
