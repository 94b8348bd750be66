//! Verification-service wire protocol: a mock HTTP server backed by any
//! face embedder, and a blocking client for it (or any compatible service).
//!
//! `POST /verify` takes `{"image_a": <base64 PNG>, "image_b": <base64 PNG>}`
//! and answers `{"confidence": <float in [0, 100]>}`.

mod client;
mod server;
mod wire;

pub use client::{ClientOptions, HttpVerificationClient};
pub use server::{router, serve, MockServer};
pub use wire::{decode_image, encode_image, mock_confidence, VerifyRequest, VerifyResponse};
