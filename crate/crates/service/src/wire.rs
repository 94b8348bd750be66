use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use dualcloak::embedding::{cosine_similarity, embed, FaceEmbedder};
use dualcloak::{Error, ImageTensor, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyRequest {
    pub image_a: String,
    pub image_b: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyResponse {
    pub confidence: f64,
}

/// Base64 of the image's 8-bit PNG encoding.
pub fn encode_image(img: &ImageTensor) -> Result<String> {
    Ok(STANDARD.encode(img.encode_png()?))
}

pub fn decode_image(b64: &str) -> Result<ImageTensor> {
    let bytes = STANDARD
        .decode(b64.trim())
        .map_err(|e| Error::Protocol(format!("invalid base64 payload: {e}")))?;
    ImageTensor::decode(&bytes)
}

/// The mock server's score: `100 * max(0, cos)` under `embedder`.
pub fn mock_confidence(embedder: &dyn FaceEmbedder, a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    let cos = cosine_similarity(&embed(embedder, a)?, &embed(embedder, b)?)?;
    Ok(100.0 * cos.max(0.0))
}
