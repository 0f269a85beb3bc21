use std::time::Duration;

use unite_core::ingest::{FetchError, ImageCache};
use unite_core::util::sha256_hex;
use unite_testkit::{MockServer, Response};

fn png(rgb: [u8; 3]) -> Vec<u8> {
    let img = image::RgbImage::from_pixel(3, 2, image::Rgb(rgb));
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).unwrap();
    out.into_inner()
}

fn server() -> MockServer {
    MockServer::start(|req| match req.path.as_str() {
        "/a.png" | "/copy.png" => Response::new(200, "image/png", png([9, 9, 9])),
        "/page" => Response::text(200, "<html></html>"),
        "/gone" => Response::text(404, "missing"),
        _ => Response::text(500, "oops"),
    })
}

#[test]
fn repeated_fetch_transfers_once() {
    let srv = server();
    let dir = tempfile::tempdir().unwrap();
    let cache = ImageCache::open(dir.path()).unwrap();
    let url = format!("{}/a.png", srv.url());
    let first = cache.fetch(&url).unwrap();
    for _ in 0..4 {
        assert!(cache.fetch(&url).unwrap().from_cache);
    }
    assert_eq!(srv.request_count(), 1);
    assert_eq!(cache.network_fetches(), 1);
    assert_eq!(first.hash, sha256_hex(&png([9, 9, 9])));
    assert_eq!(first.path, dir.path().join(&first.hash));

    let manifest = std::fs::read_to_string(dir.path().join("manifest.jsonl")).unwrap();
    let entry: serde_json::Value = serde_json::from_str(manifest.lines().next().unwrap()).unwrap();
    assert_eq!(entry["content_type"], "image/png");
    assert_eq!(entry["bytes"], png([9, 9, 9]).len());
}

#[test]
fn identical_bytes_share_one_entry() {
    let srv = server();
    let dir = tempfile::tempdir().unwrap();
    let cache = ImageCache::open(dir.path()).unwrap();
    let a = cache.fetch(&format!("{}/a.png", srv.url())).unwrap();
    let b = cache.fetch(&format!("{}/copy.png", srv.url())).unwrap();
    assert_eq!(a.hash, b.hash);
    let files = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name() != "manifest.jsonl")
        .count();
    assert_eq!(files, 1);
}

#[test]
fn failures_are_classified() {
    let srv = server();
    let dir = tempfile::tempdir().unwrap();
    let cache = ImageCache::open(dir.path())
        .unwrap()
        .with_retries(2, Duration::from_millis(1));
    assert!(matches!(
        cache.fetch(&format!("{}/page", srv.url())),
        Err(FetchError::NotImage { .. })
    ));
    assert!(matches!(
        cache.fetch(&format!("{}/gone", srv.url())),
        Err(FetchError::Http { status: 404, .. })
    ));
    let before = srv.request_count();
    assert!(matches!(
        cache.fetch(&format!("{}/broken", srv.url())),
        Err(FetchError::Network { attempts: 2, .. })
    ));
    assert_eq!(srv.request_count() - before, 2);
}

#[test]
fn parallel_fetch_of_duplicates() {
    let srv = server();
    let dir = tempfile::tempdir().unwrap();
    let cache = ImageCache::open(dir.path()).unwrap();
    let url = format!("{}/a.png", srv.url());
    let refs = vec![url.clone(); 16];
    let results = cache.fetch_all(&refs, 4).unwrap();
    assert!(results.iter().all(|r| r.is_ok()));
    assert_eq!(srv.request_count(), 1);
}
