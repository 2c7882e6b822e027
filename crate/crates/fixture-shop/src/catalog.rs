//! Deterministic product catalog.

#[derive(Debug, Clone, PartialEq)]
pub struct Product {
    pub id: u32,
    pub name: String,
    pub category: &'static str,
    pub subcategory: &'static str,
    pub price_cents: u32,
    /// Tenths of a star.
    pub rating: u8,
    pub reviews: u32,
    pub description: String,
}

impl Product {
    pub fn price(&self) -> String {
        format!("${}.{:02}", self.price_cents / 100, self.price_cents % 100)
    }

    pub fn rating_text(&self) -> String {
        format!("{}.{}", self.rating / 10, self.rating % 10)
    }
}

pub struct Category {
    pub slug: &'static str,
    pub name: &'static str,
    pub subcategories: &'static [(&'static str, &'static str)],
}

pub const CATEGORIES: &[Category] = &[
    Category {
        slug: "beauty",
        name: "Beauty & Personal Care",
        subcategories: &[("body-care", "Body Care"), ("hair-care", "Hair Care")],
    },
    Category {
        slug: "sports",
        name: "Sports & Outdoors",
        subcategories: &[("camping", "Camping"), ("cycling", "Cycling")],
    },
    Category {
        slug: "home",
        name: "Home & Kitchen",
        subcategories: &[("furniture", "Furniture"), ("seasonal-decor", "Seasonal Decor")],
    },
    Category {
        slug: "grocery",
        name: "Grocery & Gourmet Food",
        subcategories: &[("meat-substitutes", "Meat Substitutes"), ("snacks", "Snacks"), ("beverages", "Beverages")],
    },
];

pub fn category(slug: &str) -> Option<&'static Category> {
    CATEGORIES.iter().find(|c| c.slug == slug)
}

struct Seed(&'static str, &'static str, &'static str, u32, u8, u32);

/// Hand-written items. Within meat substitutes, the four items priced
/// between $100 and $199.99 appear in this order on the filtered listing.
const SEEDS: &[Seed] = &[
    Seed("Gardein Ultimate Plant-Based Chick'n Bulk Case", "grocery", "meat-substitutes", 11999, 42, 88),
    Seed("Beyond Meat Beef Beefy Crumble (Pack of 12)", "grocery", "meat-substitutes", 13999, 48, 312),
    Seed("Impossible Burger Food Service Pack", "grocery", "meat-substitutes", 15950, 45, 140),
    Seed("MorningStar Farms Veggie Sausage Bulk Box", "grocery", "meat-substitutes", 10400, 39, 57),
    Seed("Kettle Cooked Sea Salt Potato Chips", "grocery", "snacks", 399, 44, 920),
    Seed("Dark Chocolate Almond Bar 6-Pack", "grocery", "snacks", 1299, 46, 410),
    Seed("Sparkling Lime Water 24 Cans", "grocery", "beverages", 1549, 43, 233),
    Seed("Cold Brew Coffee Concentrate", "grocery", "beverages", 1899, 41, 98),
    Seed("Lavender Massage Lotion 16 oz", "beauty", "body-care", 1499, 45, 531),
    Seed("Unscented Massage Lotion for Sensitive Skin", "beauty", "body-care", 1199, 43, 207),
    Seed("Argan Oil Repair Shampoo", "beauty", "hair-care", 1050, 40, 144),
    Seed("Two-Person Dome Tent", "sports", "camping", 8999, 42, 76),
    Seed("Road Bike Water Bottle Cage", "sports", "cycling", 1295, 38, 51),
    Seed("Comfortable Grey Sofa with Cushions", "home", "furniture", 54900, 44, 63),
    Seed("Giant Inflatable Spider Halloween Decoration 8 ft", "home", "seasonal-decor", 6999, 46, 188),
    Seed("Light-Up Pumpkin Lantern Set", "home", "seasonal-decor", 2450, 41, 92),
];

const FLAVOURS: &[&str] = &["Original", "Smoky", "Spicy", "Teriyaki", "Herb"];
const FORMS: &[&str] = &["Crumbles", "Patties", "Strips", "Nuggets", "Links"];

/// Number of meat-substitute items priced under $100.
pub const BUDGET_MEAT_SUBSTITUTES: u32 = 75;

pub fn catalog() -> Vec<Product> {
    let mut out: Vec<Product> = SEEDS
        .iter()
        .enumerate()
        .map(|(i, s)| Product {
            id: i as u32 + 1,
            name: s.0.to_string(),
            category: s.1,
            subcategory: s.2,
            price_cents: s.3,
            rating: s.4,
            reviews: s.5,
            description: format!("{} from our {} range.", s.0, s.2.replace('-', " ")),
        })
        .collect();
    for k in 0..BUDGET_MEAT_SUBSTITUTES {
        let id = out.len() as u32 + 1;
        let name = format!(
            "Plant Protein {} {} {} oz",
            FLAVOURS[(k % 5) as usize],
            FORMS[((k / 5) % 5) as usize],
            8 + (k % 9) * 2
        );
        out.push(Product {
            id,
            description: format!("{name}. Ready in minutes."),
            name,
            category: "grocery",
            subcategory: "meat-substitutes",
            price_cents: 249 + (k * 1187) % 9700,
            rating: 30 + (k % 15) as u8,
            reviews: 5 + (k * 37) % 400,
        });
    }
    out
}
