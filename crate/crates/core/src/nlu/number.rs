//! Number extraction for temperature and breath-count turns.

use crate::lang::Language;
use crate::text::tokenize;

const ZH_DIGITS: [(char, u32); 12] = [
    ('零', 0),
    ('〇', 0),
    ('一', 1),
    ('二', 2),
    ('两', 2),
    ('三', 3),
    ('四', 4),
    ('五', 5),
    ('六', 6),
    ('七', 7),
    ('八', 8),
    ('九', 9),
];

const ZH_UNITS: [(char, u64); 4] = [('十', 10), ('百', 100), ('千', 1000), ('万', 10_000)];

const ZH_POINT: char = '点';

fn zh_digit(c: char) -> Option<u32> {
    ZH_DIGITS.iter().find(|(d, _)| *d == c).map(|(_, v)| *v)
}

fn zh_unit(c: char) -> Option<u64> {
    ZH_UNITS.iter().find(|(u, _)| *u == c).map(|(_, v)| *v)
}

fn is_zh_numeral(c: char) -> bool {
    zh_digit(c).is_some() || zh_unit(c).is_some()
}

/// Normalizes full-width digits and the ideographic full stop inside
/// numbers to ASCII.
fn ascii_digit(c: char) -> Option<char> {
    match c {
        '0'..='9' => Some(c),
        '０'..='９' => char::from_u32('0' as u32 + (c as u32 - '０' as u32)),
        _ => None,
    }
}

/// Converts a run of Mandarin numerals (optionally with `点` and decimal
/// digits) to a number. Returns `None` for malformed runs.
///
/// Runs with unit characters are read positionally (`三十七` = 37,
/// `一百零五` = 105); runs without units are digit strings (`二零二零` =
/// 2020).
pub fn parse_mandarin_numeral(s: &str) -> Option<f64> {
    let (int_part, frac_part) = match s.split_once(ZH_POINT) {
        Some((i, f)) => (i, Some(f)),
        None => (s, None),
    };
    if int_part.is_empty() {
        return None;
    }
    let int_value = if int_part.chars().any(|c| zh_unit(c).is_some()) {
        positional(int_part)?
    } else {
        int_part.chars().try_fold(0u64, |acc, c| {
            acc.checked_mul(10)?.checked_add(zh_digit(c)? as u64)
        })?
    };
    let mut value = int_value as f64;
    if let Some(frac) = frac_part {
        if frac.is_empty() {
            return None;
        }
        let mut scale = 0.1;
        for c in frac.chars() {
            value += zh_digit(c)? as f64 * scale;
            scale /= 10.0;
        }
    }
    Some(value)
}

fn positional(s: &str) -> Option<u64> {
    let mut total = 0u64;
    let mut section = 0u64;
    let mut digit: Option<u64> = None;
    let mut last_unit = u64::MAX;
    for c in s.chars() {
        if let Some(d) = zh_digit(c) {
            if digit.is_some_and(|x| x != 0) && d != 0 {
                // two digits in a row ("三七十") is not a positional numeral
                return None;
            }
            digit = Some(d as u64);
        } else if let Some(unit) = zh_unit(c) {
            if unit == 10_000 {
                section += digit.take().unwrap_or(0);
                total += section.max(1) * unit;
                section = 0;
                last_unit = u64::MAX;
                continue;
            }
            if unit >= last_unit {
                return None;
            }
            let d = match digit.take() {
                Some(0) => return None,
                Some(d) => d,
                // bare 十 at the start of a section means one ten
                None if unit == 10 && section == 0 => 1,
                None => return None,
            };
            section += d * unit;
            last_unit = unit;
        } else {
            return None;
        }
    }
    section += digit.unwrap_or(0);
    Some(total + section)
}

/// A number found in text, with the byte offset where it starts.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Found {
    at: usize,
    value: f64,
    /// Mandarin run without unit characters.
    digit_string: bool,
    len_chars: usize,
}

fn ascii_numbers(text: &str) -> Vec<Found> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if ascii_digit(chars[i].1).is_none() {
            i += 1;
            continue;
        }
        let start = i;
        let mut s = String::new();
        while i < chars.len() {
            if let Some(d) = ascii_digit(chars[i].1) {
                s.push(d);
                i += 1;
            } else if matches!(chars[i].1, '.' | '．')
                && !s.contains('.')
                && chars.get(i + 1).is_some_and(|(_, c)| ascii_digit(*c).is_some())
            {
                s.push('.');
                i += 1;
            } else {
                break;
            }
        }
        let negative = start > 0
            && chars[start - 1].1 == '-'
            && (start == 1 || chars[start - 2].1.is_whitespace());
        if let Ok(v) = s.parse::<f64>() {
            out.push(Found {
                at: chars[start].0,
                value: if negative { -v } else { v },
                digit_string: false,
                len_chars: i - start,
            });
        }
    }
    out
}

fn mandarin_numbers(text: &str) -> Vec<Found> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !is_zh_numeral(chars[i].1) {
            i += 1;
            continue;
        }
        let start = i;
        let mut run = String::new();
        while i < chars.len() && is_zh_numeral(chars[i].1) {
            run.push(chars[i].1);
            i += 1;
        }
        if i + 1 < chars.len() && chars[i].1 == ZH_POINT && zh_digit(chars[i + 1].1).is_some() {
            run.push(ZH_POINT);
            i += 1;
            while i < chars.len() && zh_digit(chars[i].1).is_some() {
                run.push(chars[i].1);
                i += 1;
            }
        }
        if let Some(value) = parse_mandarin_numeral(&run) {
            out.push(Found {
                at: chars[start].0,
                value,
                digit_string: !run.chars().any(|c| zh_unit(c).is_some()),
                len_chars: run.chars().count(),
            });
        }
    }
    out
}

/// First number in the text. Digits are recognised in both languages;
/// Mandarin numerals only for [`Language::Zh`].
pub fn parse_number(text: &str, lang: Language) -> Option<f64> {
    let mut found = ascii_numbers(text);
    if lang == Language::Zh {
        found.extend(mandarin_numbers(text));
    }
    found
        .into_iter()
        .min_by_key(|f| f.at)
        .map(|f| f.value)
}

const EN_ONES: [&str; 20] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
    "nineteen",
];
const EN_TENS: [&str; 8] = [
    "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
];

fn en_word_value(w: &str) -> Option<u32> {
    if let Some(i) = EN_ONES.iter().position(|x| *x == w) {
        return Some(i as u32);
    }
    if let Some(i) = EN_TENS.iter().position(|x| *x == w) {
        return Some(20 + 10 * i as u32);
    }
    if w == "hundred" {
        return Some(100);
    }
    // hyphenated compounds: twenty-one
    let (tens, ones) = w.split_once('-')?;
    let t = EN_TENS.iter().position(|x| *x == tens)?;
    let o = EN_ONES[1..10].iter().position(|x| *x == ones)?;
    Some(20 + 10 * t as u32 + o as u32 + 1)
}

/// Highest number reached when counting aloud ("one, two, three ...").
///
/// Reads digits, English number words (compounds such as `twenty one`)
/// and Mandarin numerals. A Mandarin run without unit characters counts
/// each character separately, so `一二三四五` reaches five.
pub fn count_reached(text: &str, lang: Language) -> Option<u32> {
    let mut best: Option<u32> = None;
    let mut bump = |v: u32| best = Some(best.map_or(v, |b| b.max(v)));

    for f in ascii_numbers(text) {
        if f.value >= 0.0 && f.value.fract() == 0.0 && f.value <= u32::MAX as f64 {
            bump(f.value as u32);
        }
    }
    match lang {
        Language::En => {
            let toks = tokenize(text, Language::En);
            let mut i = 0;
            while i < toks.len() {
                if let Some(v) = en_word_value(&toks[i].text) {
                    let mut v = v;
                    if (20..100).contains(&v) && v % 10 == 0 {
                        if let Some(o) = toks.get(i + 1).and_then(|t| en_word_value(&t.text)) {
                            if (1..10).contains(&o) {
                                v += o;
                                i += 1;
                            }
                        }
                    }
                    bump(v);
                }
                i += 1;
            }
        }
        Language::Zh => {
            for f in mandarin_numbers(text) {
                if f.digit_string && f.len_chars > 1 {
                    let start = &text[f.at..];
                    for c in start.chars().take(f.len_chars) {
                        if let Some(d) = zh_digit(c) {
                            bump(d);
                        }
                    }
                } else if f.value.fract() == 0.0 {
                    bump(f.value as u32);
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent integer → Mandarin formatter for 0..=100.
    fn to_mandarin(n: u32) -> String {
        const D: [&str; 10] = ["零", "一", "二", "三", "四", "五", "六", "七", "八", "九"];
        match n {
            0..=9 => D[n as usize].to_string(),
            10 => "十".to_string(),
            11..=19 => format!("十{}", D[(n % 10) as usize]),
            20..=99 if n % 10 == 0 => format!("{}十", D[(n / 10) as usize]),
            20..=99 => format!("{}十{}", D[(n / 10) as usize], D[(n % 10) as usize]),
            100 => "一百".to_string(),
            _ => unreachable!(),
        }
    }

    #[test]
    fn mandarin_exhaustive_zero_to_hundred() {
        for n in 0..=100 {
            let s = to_mandarin(n);
            assert_eq!(parse_mandarin_numeral(&s), Some(n as f64), "{s}");
            assert_eq!(parse_number(&format!("我{s}度"), Language::Zh), Some(n as f64), "{s}");
        }
    }

    #[test]
    fn mandarin_forms() {
        assert_eq!(parse_mandarin_numeral("三十七"), Some(37.0));
        assert_eq!(parse_mandarin_numeral("三十七点五"), Some(37.5));
        assert_eq!(parse_mandarin_numeral("一百零五"), Some(105.0));
        assert_eq!(parse_mandarin_numeral("两百"), Some(200.0));
        assert_eq!(parse_mandarin_numeral("二零二零"), Some(2020.0));
        assert_eq!(parse_mandarin_numeral("一万二千"), Some(12000.0));
        assert_eq!(parse_mandarin_numeral("十十"), None);
        assert_eq!(parse_mandarin_numeral("三七十"), None);
        assert_eq!(parse_mandarin_numeral("点五"), None);
    }

    #[test]
    fn english_first_number() {
        assert_eq!(parse_number("36.8 degrees", Language::En), Some(36.8));
        assert_eq!(parse_number("no idea", Language::En), None);
        assert_eq!(parse_number("it was 37, then 38", Language::En), Some(37.0));
        assert_eq!(parse_number("about -5 now", Language::En), Some(-5.0));
        assert_eq!(parse_number("version1.2.3", Language::En), Some(1.2));
        // number words are not temperatures
        assert_eq!(parse_number("thirty seven", Language::En), None);
    }

    #[test]
    fn mandarin_first_number_mixed_with_digits() {
        assert_eq!(parse_number("三十七", Language::Zh), Some(37.0));
        assert_eq!(parse_number("体温37.2度", Language::Zh), Some(37.2));
        assert_eq!(parse_number("３６．５", Language::Zh), Some(36.5));
        assert_eq!(parse_number("不知道", Language::Zh), None);
        // Mandarin numerals are ignored for English
        assert_eq!(parse_number("三十七", Language::En), None);
    }

    #[test]
    fn counting() {
        assert_eq!(count_reached("one two three four five", Language::En), Some(5));
        assert_eq!(count_reached("one, two, ... twenty one, twenty-two", Language::En), Some(22));
        assert_eq!(count_reached("1 2 3 4 5 6 7", Language::En), Some(7));
        assert_eq!(count_reached("I could not", Language::En), None);
        assert_eq!(count_reached("一二三四五", Language::Zh), Some(5));
        assert_eq!(count_reached("一，二，三……十八", Language::Zh), Some(18));
    }
}
