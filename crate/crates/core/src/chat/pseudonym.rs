use sha2::{Digest, Sha256};

const ADJECTIVES: &[&str] = &[
    "Amber", "Brave", "Calm", "Clever", "Cosy", "Curious", "Gentle", "Golden", "Happy", "Humble",
    "Jolly", "Kind", "Lively", "Lucky", "Mellow", "Merry", "Misty", "Noble", "Quiet", "Rosy",
    "Silver", "Sunny", "Swift", "Witty",
];

const ANIMALS: &[&str] = &[
    "Badger", "Crane", "Dolphin", "Falcon", "Fox", "Heron", "Koala", "Lynx", "Otter", "Owl",
    "Panda", "Penguin", "Rabbit", "Robin", "Seal", "Sparrow", "Swan", "Tiger", "Turtle", "Whale",
];

/// Display name of `user` inside `topic`: the same for every post in the
/// topic, unrelated across topics, and not derivable without the salt.
pub fn pseudonym(salt: &str, topic: &str, user: &str) -> String {
    let mut h = Sha256::new();
    for part in [salt, topic, user] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    let d = h.finalize();
    let adj = ADJECTIVES[u16::from_le_bytes([d[0], d[1]]) as usize % ADJECTIVES.len()];
    let animal = ANIMALS[u16::from_le_bytes([d[2], d[3]]) as usize % ANIMALS.len()];
    let n = u16::from_le_bytes([d[4], d[5]]) % 100;
    format!("{adj} {animal} {n:02}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_and_topic_specific() {
        assert_eq!(pseudonym("s", "movies", "u1"), pseudonym("s", "movies", "u1"));
        let names: std::collections::HashSet<_> =
            ["movies", "cooking", "music"].iter().map(|t| pseudonym("s", t, "u1")).collect();
        assert_eq!(names.len(), 3);
        assert_ne!(pseudonym("s", "movies", "u1"), pseudonym("t", "movies", "u1"));
        // Length-prefixing keeps ("ab","c") and ("a","bc") apart.
        assert_ne!(pseudonym("s", "ab", "c"), pseudonym("s", "a", "bc"));
    }
}
