use std::fs;
use std::path::PathBuf;

use crate::http::{HttpRequest, HttpResponse, HttpTransport, Method, TransportError};

/// Serves recorded item responses from `<dir>/<QID>.json`.
///
/// Any GET whose path contains `/entities/items/<QID>` is answered with the
/// stored body, or a 404 in the REST API's error shape when no file exists.
#[derive(Debug, Clone)]
pub struct FixtureTransport {
    dir: PathBuf,
}

impl FixtureTransport {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureTransport { dir: dir.into() }
    }
}

fn item_id(url: &str) -> Option<&str> {
    let rest = url.split("/entities/items/").nth(1)?;
    let id = rest.split(['/', '?']).next()?;
    (!id.is_empty()).then_some(id)
}

impl HttpTransport for FixtureTransport {
    fn execute(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        if request.method != Method::Get {
            return Ok(HttpResponse::new(405, ""));
        }
        let Some(id) = item_id(&request.url) else {
            return Ok(HttpResponse::new(400, r#"{"code":"invalid-path"}"#));
        };
        match fs::read_to_string(self.dir.join(format!("{id}.json"))) {
            Ok(body) => Ok(HttpResponse::new(200, body)),
            Err(_) => Ok(HttpResponse::new(
                404,
                format!(
                    r#"{{"code":"item-not-found","message":"Could not find an item with the ID: {id}"}}"#
                ),
            )),
        }
    }
}
