//! The eight binary social cues and containers keyed by them.
//!
//! Every cue is a yes/no question about a short egocentric segment, asked
//! from the wearer's point of view ("me" = the person wearing the glasses).
//! The fixed declaration order below is also the canonical serialization
//! order everywhere in this crate.

use serde::{Deserialize, Serialize};
use std::fmt;

/// One of the eight social cues.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cue {
    /// Other-speaker activity: any non-wearer voice in the segment.
    Osad,
    /// Speech-turn alternation: at least two people speaking in turns.
    Stad,
    /// Someone is addressing the wearer.
    Aud,
    /// The wearer is speaking to someone.
    Udsd,
    /// A person is within the wearer's personal space.
    Pad,
    /// Someone is looking at the wearer.
    Igd,
    /// The wearer is looking at someone.
    Ogd,
    /// The wearer is absorbed in an object or activity.
    Sfd,
}

impl Cue {
    /// All cues in canonical order.
    pub const ALL: [Cue; 8] = [
        Cue::Osad,
        Cue::Stad,
        Cue::Aud,
        Cue::Udsd,
        Cue::Pad,
        Cue::Igd,
        Cue::Ogd,
        Cue::Sfd,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|c| *c == self).unwrap()
    }

    pub fn from_index(i: usize) -> Option<Cue> {
        Self::ALL.get(i).copied()
    }

    /// Upper-case short name, e.g. `"OSAD"`.
    pub fn name(self) -> &'static str {
        match self {
            Cue::Osad => "OSAD",
            Cue::Stad => "STAD",
            Cue::Aud => "AUD",
            Cue::Udsd => "UDSD",
            Cue::Pad => "PAD",
            Cue::Igd => "IGD",
            Cue::Ogd => "OGD",
            Cue::Sfd => "SFD",
        }
    }

    /// Lower-case key used in serialized maps, e.g. `"osad"`.
    pub fn key(self) -> &'static str {
        match self {
            Cue::Osad => "osad",
            Cue::Stad => "stad",
            Cue::Aud => "aud",
            Cue::Udsd => "udsd",
            Cue::Pad => "pad",
            Cue::Igd => "igd",
            Cue::Ogd => "ogd",
            Cue::Sfd => "sfd",
        }
    }

    /// The exact question a detector answers for this cue.
    pub fn question(self) -> &'static str {
        match self {
            Cue::Osad => "Is someone else talking?",
            Cue::Stad => "Are people talking in turns?",
            Cue::Aud => "Is someone talking to me?",
            Cue::Udsd => "Am I talking?",
            Cue::Pad => "Are people in personal space?",
            Cue::Igd => "Is someone looking at me?",
            Cue::Ogd => "Am I looking at someone?",
            Cue::Sfd => "Am I focusing on something?",
        }
    }

    /// Whether answering this cue requires hearing the segment.
    pub fn needs_audio(self) -> bool {
        matches!(self, Cue::Osad | Cue::Stad | Cue::Aud | Cue::Udsd)
    }

    /// Visual-branch cues (complement of [`Cue::needs_audio`]).
    pub fn is_visual(self) -> bool {
        !self.needs_audio()
    }
}

impl fmt::Display for Cue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A value per cue, in canonical order. Serializes as an object with the
/// lower-case cue keys.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct CueMap<T> {
    pub osad: T,
    pub stad: T,
    pub aud: T,
    pub udsd: T,
    pub pad: T,
    pub igd: T,
    pub ogd: T,
    pub sfd: T,
}

impl<T> CueMap<T> {
    pub fn from_fn(mut f: impl FnMut(Cue) -> T) -> Self {
        CueMap {
            osad: f(Cue::Osad),
            stad: f(Cue::Stad),
            aud: f(Cue::Aud),
            udsd: f(Cue::Udsd),
            pad: f(Cue::Pad),
            igd: f(Cue::Igd),
            ogd: f(Cue::Ogd),
            sfd: f(Cue::Sfd),
        }
    }

    pub fn get(&self, cue: Cue) -> &T {
        match cue {
            Cue::Osad => &self.osad,
            Cue::Stad => &self.stad,
            Cue::Aud => &self.aud,
            Cue::Udsd => &self.udsd,
            Cue::Pad => &self.pad,
            Cue::Igd => &self.igd,
            Cue::Ogd => &self.ogd,
            Cue::Sfd => &self.sfd,
        }
    }

    pub fn get_mut(&mut self, cue: Cue) -> &mut T {
        match cue {
            Cue::Osad => &mut self.osad,
            Cue::Stad => &mut self.stad,
            Cue::Aud => &mut self.aud,
            Cue::Udsd => &mut self.udsd,
            Cue::Pad => &mut self.pad,
            Cue::Igd => &mut self.igd,
            Cue::Ogd => &mut self.ogd,
            Cue::Sfd => &mut self.sfd,
        }
    }

    pub fn set(&mut self, cue: Cue, value: T) {
        *self.get_mut(cue) = value;
    }

    pub fn map<U>(&self, mut f: impl FnMut(Cue, &T) -> U) -> CueMap<U> {
        CueMap::from_fn(|c| f(c, self.get(c)))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Cue, &T)> {
        Cue::ALL.iter().map(move |&c| (c, self.get(c)))
    }
}

/// The eight boolean cues of one segment.
pub type CueVector = CueMap<bool>;

impl CueMap<bool> {
    /// Build from a bitmask where bit `i` is `Cue::ALL[i]`. Handy for
    /// exhaustive truth-table enumeration.
    pub fn from_bits(bits: u8) -> Self {
        CueMap::from_fn(|c| bits >> c.index() & 1 == 1)
    }

    pub fn bits(&self) -> u8 {
        self.iter()
            .fold(0u8, |acc, (c, &v)| acc | (v as u8) << c.index())
    }

    pub fn count_true(&self) -> usize {
        self.iter().filter(|(_, &v)| v).count()
    }
}
