//! Semantic id slugs.

use std::collections::HashSet;

pub const MAX_SLUG_LEN: usize = 40;

/// Lowercases, maps every run of non-alphanumeric characters to a single
/// underscore, trims underscores at both ends and truncates to
/// [`MAX_SLUG_LEN`] characters.
pub fn slugify(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_sep = false;
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_ascii_alphanumeric() {
            if pending_sep && !out.is_empty() {
                out.push('_');
            }
            pending_sep = false;
            out.push(c);
        } else {
            pending_sep = true;
        }
    }
    if out.len() > MAX_SLUG_LEN {
        out.truncate(MAX_SLUG_LEN);
        while out.ends_with('_') {
            out.pop();
        }
    }
    out
}

/// Hands out unique ids within one page: the first use of a slug keeps it,
/// later uses get numeric suffixes starting at 2.
#[derive(Debug, Default)]
pub struct IdAllocator {
    used: HashSet<String>,
}

impl IdAllocator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn allocate(&mut self, base: &str) -> String {
        if self.used.insert(base.to_string()) {
            return base.to_string();
        }
        let mut n = 2usize;
        loop {
            let candidate = format!("{base}{n}");
            if self.used.insert(candidate.clone()) {
                return candidate;
            }
            n += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn appendix_style_slugs() {
        assert_eq!(slugify("Grocery & Gourmet Food"), "grocery_gourmet_food");
        assert_eq!(slugify("$100.00-$199.99 (4 item)"), "100_00_199_99_4_item");
        assert_eq!(slugify("Add to Cart"), "add_to_cart");
        assert_eq!(slugify("My Cart (1) 1 items"), "my_cart_1_1_items");
        assert_eq!(slugify("Proceed to Checkout"), "proceed_to_checkout");
        assert_eq!(slugify("  ***  "), "");
    }

    #[test]
    fn truncates_at_forty() {
        let s = slugify("a very long product name that keeps going and going forever");
        assert!(s.len() <= MAX_SLUG_LEN);
        assert!(!s.ends_with('_'));
        assert_eq!(s, "a_very_long_product_name_that_keeps_goin");
    }

    #[test]
    fn suffixes_start_at_two() {
        let mut ids = IdAllocator::new();
        assert_eq!(ids.allocate("add_to_cart"), "add_to_cart");
        assert_eq!(ids.allocate("add_to_cart"), "add_to_cart2");
        assert_eq!(ids.allocate("add_to_cart"), "add_to_cart3");
        assert_eq!(ids.allocate("item2"), "item2");
        assert_eq!(ids.allocate("item"), "item");
        assert_eq!(ids.allocate("item"), "item3");
    }

    proptest! {
        #[test]
        fn slug_grammar(text in ".{0,80}") {
            let s = slugify(&text);
            prop_assert!(s.len() <= MAX_SLUG_LEN);
            prop_assert!(s.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_'));
            prop_assert!(!s.starts_with('_') && !s.ends_with('_'));
            prop_assert!(!s.contains("__"));
        }

        #[test]
        fn allocations_unique(bases in proptest::collection::vec("[a-c]{1,2}[0-9]?", 1..40)) {
            let mut ids = IdAllocator::new();
            let out: Vec<String> = bases.iter().map(|b| ids.allocate(b)).collect();
            let set: HashSet<_> = out.iter().collect();
            prop_assert_eq!(set.len(), out.len());
        }
    }
}
