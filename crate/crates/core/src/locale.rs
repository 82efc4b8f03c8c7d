//! Locale tags used by the task: English sources and ten target languages.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Locale {
    En,
    Ar,
    De,
    Es,
    Fr,
    It,
    Ja,
    Ko,
    Th,
    Tr,
    Zh,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unsupported locale tag `{0}`")]
pub struct UnknownLocale(pub String);

impl Locale {
    /// Every target language, in code order.
    pub const TARGETS: [Locale; 10] = [
        Locale::Ar,
        Locale::De,
        Locale::Es,
        Locale::Fr,
        Locale::It,
        Locale::Ja,
        Locale::Ko,
        Locale::Th,
        Locale::Tr,
        Locale::Zh,
    ];

    /// Targets written in Latin script.
    pub const LATIN_TARGETS: [Locale; 4] = [Locale::De, Locale::Es, Locale::Fr, Locale::It];

    pub fn code(self) -> &'static str {
        match self {
            Locale::En => "en",
            Locale::Ar => "ar",
            Locale::De => "de",
            Locale::Es => "es",
            Locale::Fr => "fr",
            Locale::It => "it",
            Locale::Ja => "ja",
            Locale::Ko => "ko",
            Locale::Th => "th",
            Locale::Tr => "tr",
            Locale::Zh => "zh",
        }
    }

    /// English name of the language, used in prompts and summaries.
    pub fn language_name(self) -> &'static str {
        match self {
            Locale::En => "English",
            Locale::Ar => "Arabic",
            Locale::De => "German",
            Locale::Es => "Spanish",
            Locale::Fr => "French",
            Locale::It => "Italian",
            Locale::Ja => "Japanese",
            Locale::Ko => "Korean",
            Locale::Th => "Thai",
            Locale::Tr => "Turkish",
            Locale::Zh => "Chinese",
        }
    }

    pub fn is_target(self) -> bool {
        self != Locale::En
    }

    /// Latin-script locales get case-folded matching and take part in the
    /// label-similarity analysis. English and Turkish are Latin too, but
    /// the analysis set is restricted to [`Locale::LATIN_TARGETS`].
    pub fn is_latin_script(self) -> bool {
        matches!(
            self,
            Locale::En | Locale::De | Locale::Es | Locale::Fr | Locale::It | Locale::Tr
        )
    }
}

impl fmt::Display for Locale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Locale {
    type Err = UnknownLocale;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        // Accept region-qualified tags such as `ko_KR` or `zh-TW`.
        let primary = s
            .split(['-', '_'])
            .next()
            .unwrap_or_default()
            .to_ascii_lowercase();
        Ok(match primary.as_str() {
            "en" => Locale::En,
            "ar" => Locale::Ar,
            "de" => Locale::De,
            "es" => Locale::Es,
            "fr" => Locale::Fr,
            "it" => Locale::It,
            "ja" => Locale::Ja,
            "ko" => Locale::Ko,
            "th" => Locale::Th,
            "tr" => Locale::Tr,
            "zh" => Locale::Zh,
            _ => return Err(UnknownLocale(s.to_string())),
        })
    }
}

impl Serialize for Locale {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for Locale {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_region_tags() {
        assert_eq!("ko_KR".parse::<Locale>().unwrap(), Locale::Ko);
        assert_eq!("zh-TW".parse::<Locale>().unwrap(), Locale::Zh);
        assert_eq!("EN".parse::<Locale>().unwrap(), Locale::En);
        assert!("pt".parse::<Locale>().is_err());
    }

    #[test]
    fn targets_exclude_english() {
        assert_eq!(Locale::TARGETS.len(), 10);
        assert!(Locale::TARGETS.iter().all(|l| l.is_target()));
        assert!(Locale::LATIN_TARGETS.iter().all(|l| l.is_latin_script()));
    }
}
