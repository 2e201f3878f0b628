//! Vendor login flows. Every function performs exactly one attempt.

use std::net::SocketAddrV4;
use std::time::Duration;

use md5::{Digest, Md5};
use serde::{Deserialize, Serialize};

use super::credentials::Credential;
use super::identify::Vendor;
use crate::proto::http::{self, HttpError, Request, Response};

pub const WESTERMO_PATH: &str = "/";
pub const EWON_PATH: &str = "/Ast/MainAst.shtm";
pub const MOXA_V1_LOGIN_PATH: &str = "/home.htm";
pub const SIERRA_LOGIN_PATH: &str = "/xml/Connect.xml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptOutcome {
    Accepted,
    Rejected,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CredentialAttempt {
    pub username: String,
    pub password: String,
    pub outcome: AttemptOutcome,
}

/// Page texts that tell a Moxa console's successful login from a failed one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoxaMarkers {
    pub success: String,
    pub failure: String,
}

impl Default for MoxaMarkers {
    fn default() -> Self {
        Self {
            success: "Main Menu".into(),
            failure: "Password error".into(),
        }
    }
}

impl MoxaMarkers {
    fn judge(&self, body: &str) -> AttemptOutcome {
        if body.contains(&self.success) {
            AttemptOutcome::Accepted
        } else if body.contains(&self.failure) {
            AttemptOutcome::Rejected
        } else {
            AttemptOutcome::Indeterminate
        }
    }
}

/// Lowercase hex MD5 of `text`.
pub fn md5_hex(text: &str) -> String {
    Md5::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// The exact ACEmanager login document.
pub fn sierra_login_body(username: &str, password: &str) -> String {
    format!(
        "<request xmlns=\"urn:acemanager\"><connect><login>{username}</login><password><![CDATA[{password}]]></password></connect></request>"
    )
}

/// Value of the hidden `FakeChallenge` form field, if the page has one.
pub fn extract_challenge(page: &str) -> Option<String> {
    let at = page.find("name=\"FakeChallenge\"")?;
    let tag_start = page[..at].rfind('<')?;
    let tag_end = at + page[at..].find('>')?;
    let tag = &page[tag_start..tag_end];
    let v = tag.find("value=\"")? + "value=\"".len();
    let len = tag[v..].find('"')?;
    Some(tag[v..v + len].to_string())
}

/// Reads the `<status>` of an ACEmanager reply; 0 means the login worked.
fn sierra_status(body: &str) -> Option<i64> {
    let start = body.find("<status>")? + "<status>".len();
    let end = start + body[start..].find("</status>")?;
    body[start..end].trim().parse().ok()
}

pub(crate) struct Session<'a> {
    pub target: SocketAddrV4,
    pub timeout: Duration,
    pub markers: &'a MoxaMarkers,
}

impl Session<'_> {
    fn send(&self, request: &Request) -> Result<Response, HttpError> {
        http::send(self.target, request, self.timeout)
    }

    /// Whether the console answers without any login.
    pub fn open_access(&self, vendor: Vendor) -> Result<bool, HttpError> {
        match vendor {
            Vendor::Westermo | Vendor::Ewon => {
                Ok(self.send(&Request::get(basic_path(vendor)))?.status == 200)
            }
            Vendor::MoxaV1 | Vendor::MoxaV2 => {
                let page = self.send(&Request::get("/"))?.text();
                Ok(extract_challenge(&page).is_none() && page.contains(&self.markers.success))
            }
            Vendor::SierraWireless => Ok(false),
        }
    }

    pub fn attempt(&self, vendor: Vendor, cred: &Credential) -> AttemptOutcome {
        let outcome = match vendor {
            Vendor::Westermo | Vendor::Ewon => self.basic(basic_path(vendor), cred),
            Vendor::MoxaV1 => self.moxa_v1(cred),
            Vendor::MoxaV2 => self.moxa_v2(cred),
            Vendor::SierraWireless => self.sierra(cred),
        };
        outcome.unwrap_or(AttemptOutcome::Indeterminate)
    }

    fn basic(&self, path: &str, cred: &Credential) -> Result<AttemptOutcome, HttpError> {
        let resp = self.send(&Request::get(path).basic_auth(&cred.username, &cred.password))?;
        Ok(match resp.status {
            200 => AttemptOutcome::Accepted,
            401 | 403 => AttemptOutcome::Rejected,
            _ => AttemptOutcome::Indeterminate,
        })
    }

    fn challenge(&self) -> Result<Option<String>, HttpError> {
        Ok(extract_challenge(&self.send(&Request::get("/"))?.text()))
    }

    fn moxa_v1(&self, cred: &Credential) -> Result<AttemptOutcome, HttpError> {
        let Some(challenge) = self.challenge()? else {
            return Ok(AttemptOutcome::Indeterminate);
        };
        let query = http::form_encode(&[
            ("Password", &md5_hex(&cred.password)),
            ("Submit", "Submit"),
            ("token_text", ""),
            ("FakeChallenge", &challenge),
        ]);
        let resp = self.send(&Request::get(&format!("{MOXA_V1_LOGIN_PATH}?{query}")))?;
        Ok(self.markers.judge(&resp.text()))
    }

    fn moxa_v2(&self, cred: &Credential) -> Result<AttemptOutcome, HttpError> {
        let Some(challenge) = self.challenge()? else {
            return Ok(AttemptOutcome::Indeterminate);
        };
        let body = http::form_encode(&[
            ("Username", &cred.username),
            ("Password", ""),
            ("MD5Password", &md5_hex(&cred.password)),
            ("FakeChallenge", &challenge),
            ("Submit.x", "45"),
            ("Submit.y", "24"),
        ]);
        let resp = self.send(&Request::post(
            "/",
            "application/x-www-form-urlencoded",
            body,
        ))?;
        Ok(self.markers.judge(&resp.text()))
    }

    fn sierra(&self, cred: &Credential) -> Result<AttemptOutcome, HttpError> {
        let body = sierra_login_body(&cred.username, &cred.password);
        let resp = self.send(&Request::post(SIERRA_LOGIN_PATH, "text/xml", body))?;
        Ok(match sierra_status(&resp.text()) {
            Some(0) => AttemptOutcome::Accepted,
            Some(_) => AttemptOutcome::Rejected,
            None => AttemptOutcome::Indeterminate,
        })
    }
}

fn basic_path(vendor: Vendor) -> &'static str {
    if vendor == Vendor::Ewon {
        EWON_PATH
    } else {
        WESTERMO_PATH
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn md5_of_admin() {
        assert_eq!(md5_hex("admin"), "21232f297a57a5a743894a0e4a801fc3");
        assert_eq!(md5_hex(""), "d41d8cd98f00b204e9800998ecf8427e");
    }

    #[test]
    fn challenge_field() {
        let page = r#"<form><input type="hidden" name="FakeChallenge" value="Ab12Cd"><input type="submit"></form>"#;
        assert_eq!(extract_challenge(page).as_deref(), Some("Ab12Cd"));
        let reordered = r#"<INPUT value="x9" type=hidden name="FakeChallenge">"#;
        assert_eq!(extract_challenge(reordered).as_deref(), Some("x9"));
        assert_eq!(extract_challenge("<html>Main Menu</html>"), None);
    }

    #[test]
    fn sierra_body_template() {
        assert_eq!(
            sierra_login_body("user", "12345"),
            "<request xmlns=\"urn:acemanager\"><connect><login>user</login><password><![CDATA[12345]]></password></connect></request>"
        );
    }

    #[test]
    fn sierra_reply_status() {
        assert_eq!(
            sierra_status(
                "<response><action name=\"connect\"><status>0</status></action></response>"
            ),
            Some(0)
        );
        assert_eq!(sierra_status("<status> -1 </status>"), Some(-1));
        assert_eq!(sierra_status("<html/>"), None);
    }
}
