//! Serve the HTTP API over a campaign seeded with the bundled data.
//!
//!     cargo run --release --example api_server -- 8080
//!     curl localhost:8080/hypervolume

use hitl_mobo::campaign::{bundled_campaign, CampaignConfig};
use hitl_mobo::server_api::serve_blocking;

fn main() -> hitl_mobo::Result<()> {
    let port: u16 = std::env::args().nth(1).map_or(8080, |a| a.parse().expect("port"));
    let state = bundled_campaign(CampaignConfig::default())?;
    serve_blocking(state, None, "127.0.0.1", port)
}
