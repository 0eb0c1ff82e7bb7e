pub fn probe() {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(b"hello");
    let out = h.finalize();
    println!("{}", hex::encode(out));

    use rand::SeedableRng;
    use rand_distr::Distribution;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let x: f64 = rand_distr::StandardNormal.sample(&mut rng);
    use rand::Rng;
    let k: usize = rng.random_range(0..10usize);
    println!("{x} {k}");
}

pub fn probe_http(url: &str) -> Result<serde_json::Value, Box<dyn std::error::Error>> {
    let body = serde_json::json!({"texts": ["a"]});
    let mut resp = ureq::post(url).send_json(&body)?;
    let v: serde_json::Value = resp.body_mut().read_json()?;
    Ok(v)
}
