use std::time::Duration;

use crate::error::{Error, Result};
use crate::image::ImageTensor;

/// A remote same-identity scorer in the style of commercial face APIs.
pub trait VerificationServiceClient: Send + Sync {
    fn endpoint(&self) -> &str;
    fn timeout(&self) -> Duration;
    /// Raw confidence reported by the service for `(a, b)`.
    fn confidence(&self, a: &ImageTensor, b: &ImageTensor) -> Result<f64>;
}

/// Confidence for one pair, checked to lie in `[0, 100]`.
pub fn api_confidence(
    client: &dyn VerificationServiceClient,
    a: &ImageTensor,
    b: &ImageTensor,
) -> Result<f64> {
    let c = client.confidence(a, b)?;
    if !(0.0..=100.0).contains(&c) {
        return Err(Error::Protocol(format!(
            "{} returned confidence {c} outside [0, 100]",
            client.endpoint()
        )));
    }
    Ok(c)
}

/// Mean confidence over `pairs`, with at most `parallelism` requests in
/// flight (1 means strictly sequential). Any failed pair fails the batch.
pub fn mean_api_confidence(
    client: &dyn VerificationServiceClient,
    pairs: &[(&ImageTensor, &ImageTensor)],
    parallelism: usize,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::param("no pairs to score"));
    }
    let workers = parallelism.clamp(1, pairs.len());
    let scores: Vec<f64> = if workers == 1 {
        pairs
            .iter()
            .map(|(a, b)| api_confidence(client, a, b))
            .collect::<Result<_>>()?
    } else {
        let chunk = pairs.len().div_ceil(workers);
        std::thread::scope(|s| {
            let handles: Vec<_> = pairs
                .chunks(chunk)
                .map(|part| {
                    s.spawn(move || {
                        part.iter()
                            .map(|(a, b)| api_confidence(client, a, b))
                            .collect::<Result<Vec<f64>>>()
                    })
                })
                .collect();
            let mut all = Vec::with_capacity(pairs.len());
            for h in handles {
                all.extend(h.join().expect("confidence worker panicked")?);
            }
            Ok::<_, Error>(all)
        })?
    };
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}
