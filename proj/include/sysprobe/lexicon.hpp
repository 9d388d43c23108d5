#pragma once

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "sysprobe/errors.hpp"

namespace sysprobe {

// Word lists that fill the comparison templates: nouns for the X/Z slots,
// adjectives for the Y slot, and the three np_* lists for composing long
// noun phrases.
struct Lexicon {
    std::vector<std::string> nouns;
    std::vector<std::string> adjectives;
    std::vector<std::string> np_adjectives;
    std::vector<std::string> np_nouns;
    std::vector<std::string> np_preps;

    void validate() const {
        auto check = [](const std::vector<std::string>& list, const char* name) {
            if (list.empty())
                throw InsufficientLexicon(std::string("lexicon section \"") + name + "\" is empty");
            std::unordered_set<std::string> seen;
            for (const auto& word : list)
                if (!seen.insert(word).second)
                    throw ParseError(std::string("duplicate word \"") + word + "\" in lexicon section \"" +
                                     name + "\"");
        };
        check(nouns, "nouns");
        check(adjectives, "adjectives");
        check(np_adjectives, "np_adjectives");
        check(np_nouns, "np_nouns");
        check(np_preps, "np_preps");

        std::unordered_set<std::string> noun_set(nouns.begin(), nouns.end());
        for (const auto& adj : adjectives)
            if (noun_set.count(adj))
                throw ParseError("word \"" + adj + "\" appears in both nouns and adjectives");
    }
};

// One word per line under section headers #nouns, #adjectives,
// #np_adjectives, #np_nouns, #np_preps. Blank lines ignored.
inline Lexicon load_lexicon_stream(std::istream& in) {
    Lexicon lexicon;
    std::vector<std::string>* section = nullptr;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line == "#nouns") section = &lexicon.nouns;
            else if (line == "#adjectives") section = &lexicon.adjectives;
            else if (line == "#np_adjectives") section = &lexicon.np_adjectives;
            else if (line == "#np_nouns") section = &lexicon.np_nouns;
            else if (line == "#np_preps") section = &lexicon.np_preps;
            else throw ParseError("unknown lexicon section \"" + line + "\"", line_no);
            continue;
        }
        if (!section) throw ParseError("word before any section header", line_no);
        std::transform(line.begin(), line.end(), line.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (line.find_first_of(" \t") != std::string::npos)
            throw ParseError("lexicon entry \"" + line + "\" contains whitespace", line_no);
        section->push_back(line);
    }
    lexicon.validate();
    return lexicon;
}

inline Lexicon load_lexicon(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open lexicon file: " + path);
    return load_lexicon_stream(in);
}

}  // namespace sysprobe
