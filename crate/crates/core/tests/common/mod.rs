//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use groundplan::Point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimum WCSS over every labeling of `points` with at most `k` labels.
/// For `n >= k` this equals the optimum with exactly `k` non-empty clusters.
pub fn brute_force_wcss(points: &[Point], k: usize) -> f64 {
    let n = points.len();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut sums = vec![(0.0f64, 0.0f64, 0usize); k];
        for (p, &l) in points.iter().zip(&labels) {
            sums[l].0 += p.x;
            sums[l].1 += p.y;
            sums[l].2 += 1;
        }
        let mut cost = 0.0;
        for (p, &l) in points.iter().zip(&labels) {
            let (sx, sy, c) = sums[l];
            let (cx, cy) = (sx / c as f64, sy / c as f64);
            cost += (p.x - cx).powi(2) + (p.y - cy).powi(2);
        }
        best = best.min(cost);
        // next labeling in base k
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
    }
}

/// Seeded point sets mixing lattice coordinates (ties, duplicates) and
/// continuous coordinates.
pub fn point_sets(n: usize, count: usize, seed: u64) -> Vec<Vec<Point>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            (0..n)
                .map(|_| {
                    if i % 2 == 0 {
                        Point::new(rng.random_range(0..5) as f64 * 0.75, rng.random_range(0..5) as f64 * 0.75)
                    } else {
                        Point::new(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0))
                    }
                })
                .collect()
        })
        .collect()
}

/// Minimal HTTP/1.1 server answering every POST with `handler(body)`.
pub struct StubServer {
    pub url: String,
    pub hits: std::sync::Arc<std::sync::atomic::AtomicUsize>,
}

impl StubServer {
    pub fn start<F>(handler: F) -> StubServer
    where
        F: Fn(&str) -> (u16, String) + Send + Sync + 'static,
    {
        use std::io::{BufRead, BufReader, Read, Write};
        use std::sync::atomic::Ordering;
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/complete", listener.local_addr().unwrap());
        let hits = std::sync::Arc::new(std::sync::atomic::AtomicUsize::new(0));
        let counter = hits.clone();
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 {
                        break;
                    }
                    let line = line.trim_end();
                    if line.is_empty() {
                        break;
                    }
                    if let Some((k, v)) = line.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            len = v.trim().parse().unwrap_or(0);
                        }
                    }
                }
                let mut body = vec![0u8; len];
                let _ = reader.read_exact(&mut body);
                counter.fetch_add(1, Ordering::SeqCst);
                let (status, reply) = handler(&String::from_utf8_lossy(&body));
                let resp = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                    reply.len()
                );
                let _ = stream.write_all(resp.as_bytes());
            }
        });
        StubServer { url, hits }
    }

    pub fn hit_count(&self) -> usize {
        self.hits.load(std::sync::atomic::Ordering::SeqCst)
    }
}

/// Backend stand-in: moves to and grasps the first listed object.
pub fn scripted_planner(body: &str) -> (u16, String) {
    let req: serde_json::Value = serde_json::from_str(body).unwrap();
    let prompt = req["prompt"].as_str().unwrap_or("");
    let first = prompt
        .lines()
        .find_map(|l| l.strip_prefix("Objects in the scene: ["))
        .and_then(|rest| rest.trim_end_matches(']').split(", ").next().map(str::to_string))
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "nothing".into());
    let text = format!("Step 1. Move to the {first}\nStep 2. Grasp the {first}");
    (200, serde_json::json!({ "text": text }).to_string())
}
