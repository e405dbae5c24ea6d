#include "rdos/simenv.hpp"

#include <algorithm>
#include <cstdio>

namespace rdos {

namespace {

const std::vector<std::string> kControl = {
    "thought", "action", "observation", "i", "will", "need", "to", "the", "so", "then", "and", "for",
    "a", "of", "now", "next", "should", "this", "it", "with", "on", "in", "is", "my", "be", "before",
    "after", "all", "that", "page", "results", "user", "task", "request", "find", "matches", "right",
    "looks", "good", "done", "answer", "first", "from", "by", "at", "as", "are", "can", "item", "here",
    "check", "pick", "read", "mentions", "shows", "has", "link", "clear", "send", "selected", "found",
    "docs", "run", "report", "files", "about",
};

const std::vector<std::string> kIntent = {"access", "visit", "open", "fetch", "browse", "load", "view", "retrieve"};

const std::vector<std::string> kTools = {
    "get_webpage", "search", "click", "buy", "read_inbox", "search_contacts", "send_email", "list_dir",
    "read_file", "run_command",
};

const std::vector<std::string> kUrls = {"attacker.test", "shop.test", "reviews.test", "mail.test", "docs.test"};

const std::vector<std::string> kWebShop = {
    "shoes", "red", "blue", "black", "white", "size", "price", "budget", "cart", "product", "brand", "cheap",
    "rating", "review", "color", "option", "store", "order", "dollars", "under", "running", "jacket",
    "backpack", "lamp", "mug", "headphones", "wireless", "leather", "cotton", "medium", "large", "small",
    "stock", "shipping", "purchase", "compare", "listing", "seller", "discount", "quantity",
};

const std::vector<std::string> kEmail = {
    "email", "inbox", "message", "reply", "contact", "subject", "meeting", "schedule", "draft", "recipient",
    "attachment", "calendar", "thread", "sender", "invite", "monday", "tuesday", "friday", "agenda", "notes",
    "colleague", "manager", "team", "confirm", "deadline", "project", "address", "forward", "urgent",
    "summary",
};

const std::vector<std::string> kOs = {
    "file", "directory", "command", "shell", "path", "log", "config", "process", "disk", "permission",
    "script", "backup", "folder", "home", "tmp", "archive", "compress", "delete", "copy", "move", "list",
    "size_mb", "owner", "error", "service", "restart", "status", "output", "user_id", "cron",
};

const std::vector<std::string> kReasoning = {
    "compute", "verify", "prove", "puzzle", "step", "sum", "prime", "sequence", "matrix", "derive",
    "enumerate", "every", "each", "constraint", "iterate", "lemma", "case", "count", "digits", "factor",
    "equation", "solve", "remainder", "product_of", "parity", "induction", "subproblem", "table", "cross",
    "consistency", "exhaustive", "permutation", "combination", "modulo", "square", "root", "recursively",
};

const std::vector<std::string> kPolicy = {
    "always", "rule", "policy", "remember", "double", "recheck", "future", "later", "turns", "reasoning",
    "carefully", "justify", "audit", "trace", "confirm_each", "re-derive", "revisit", "again", "never",
    "skip",
};

const std::vector<std::string> kMarkers = {"<not-found>", "<discarded>", "<invalid>"};

std::vector<TokenId> ids(const Vocabulary& v, const std::vector<std::string>& words)
{
    std::vector<TokenId> out;
    out.reserve(words.size());
    for (const auto& w : words) {
        out.push_back(v.id_of(w));
    }
    return out;
}

Lexicon build()
{
    std::vector<std::string> words;
    for (const auto* group : {&kControl, &kIntent, &kTools, &kUrls, &kWebShop, &kEmail, &kOs, &kReasoning,
                              &kPolicy, &kMarkers}) {
        words.insert(words.end(), group->begin(), group->end());
    }
    std::vector<std::string> filler;
    for (int i = 0; i < 64; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "w%02d", i);
        filler.emplace_back(buf);
    }
    words.insert(words.end(), filler.begin(), filler.end());

    Lexicon lex;
    lex.vocab = Vocabulary(words);
    lex.intent_verbs = ids(lex.vocab, kIntent);
    lex.url = lex.vocab.id_of(kAttackerUrl);
    lex.nesting_marker = lex.vocab.id_of(kNestingMarker);
    lex.reasoning_words = ids(lex.vocab, kReasoning);
    std::erase(lex.reasoning_words, lex.nesting_marker);
    lex.policy_words = ids(lex.vocab, kPolicy);
    lex.env_words[EnvKind::WebShop] = ids(lex.vocab, kWebShop);
    lex.env_words[EnvKind::Email] = ids(lex.vocab, kEmail);
    lex.env_words[EnvKind::Os] = ids(lex.vocab, kOs);
    lex.filler_words = ids(lex.vocab, filler);
    lex.not_found = lex.vocab.id_of("<not-found>");
    lex.discarded = lex.vocab.id_of("<discarded>");
    lex.invalid = lex.vocab.id_of("<invalid>");
    return lex;
}

} // namespace

bool Lexicon::is_intent_verb(TokenId t) const noexcept
{
    return std::find(intent_verbs.begin(), intent_verbs.end(), t) != intent_verbs.end();
}

const Lexicon& reference_lexicon()
{
    static const Lexicon lex = build();
    return lex;
}

} // namespace rdos
