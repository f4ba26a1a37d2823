// Filler lines for synthetic conversations. None of them may trip a lexical
// cue, and no two may look like rephrasings or near-duplicates of each other.

pub const USER_LINES: [&str; 32] = [
    "Can you look up my recent order for the desk lamp",
    "I would like to change the shipping address on file",
    "My flight next Tuesday needs a seat upgrade if possible",
    "Which payment methods are saved on my account right now",
    "Could you check whether the blue backpack comes in large",
    "I need to add a checked bag to my reservation",
    "Please confirm the billing zip code you have for me",
    "What time does the flight from Boston depart tomorrow",
    "The jacket arrived in the wrong color so I want an exchange",
    "How many loyalty points do I currently have available",
    "Is there a cheaper fare on the afternoon departure",
    "Can my sister be added as a passenger on this booking",
    "I ordered two chairs but only one was delivered",
    "Would it be possible to cancel the hotel portion only",
    "Show me the items included in my last purchase",
    "Does the coffee grinder have a warranty option",
    "My email address changed recently so update it please",
    "Which gate will the Denver connection leave from",
    "Could you split the refund between two cards",
    "I am travelling with an infant on the return leg",
    "When will the replacement headphones be shipped out",
    "Please move my booking to the earlier morning slot",
    "Can you tell me the status of my pending return",
    "Are pets allowed in the cabin on this route",
    "I want the gift card balance applied to my order",
    "How long does standard delivery take to Oregon",
    "Could the invoice be sent to my office address instead",
    "My membership tier seems outdated on the profile",
    "Is the vegetarian meal option available for both legs",
    "Swap the medium hoodie for an extra large one",
    "Do you have the tracking number for package three",
    "I would rather keep the original dinner reservation time",
];

pub const ASSISTANT_LINES: [&str; 32] = [
    "I have pulled up the account and can see the details now",
    "Let me review the reservation before making any changes",
    "The order shows two items that were processed last week",
    "Your profile lists a gold membership with an active card",
    "I can update that for you once you confirm the identifier",
    "The afternoon departure currently has seats in economy",
    "That product is available in three sizes at the moment",
    "A checked bag costs fifty dollars on this itinerary",
    "The exchange will be processed after the original ships back",
    "Your loyalty balance is shown on the summary page",
    "I will need the passenger name exactly as on the passport",
    "The missing chair has been flagged for the warehouse team",
    "Cancelling part of the package changes the total price",
    "Here is the breakdown of the most recent purchase",
    "An extended warranty can be attached during checkout",
    "The contact email on record has been replaced",
    "Connection gates are assigned roughly two hours ahead",
    "Refunds can go back to the original payment method only",
    "Infants under two may travel on a parent lap",
    "Replacement items usually leave the depot within days",
    "The earlier slot has room for your whole party",
    "Your return was received and is being inspected",
    "Small animals in carriers are accepted on that route",
    "The gift card covers part of the amount due",
    "Standard delivery to the west coast takes five business days",
    "Invoices can be routed to any address you provide",
    "Membership tiers refresh at the start of each month",
    "Special meals must be requested per flight segment",
    "The larger hoodie is in stock and ready to swap",
    "Tracking numbers appear once the carrier scans the box",
    "The dinner booking will remain at the original hour",
    "I found a matching record under your phone number",
];
