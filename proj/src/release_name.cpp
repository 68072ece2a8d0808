#include "btsupply/release_name.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace btsup {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    return out;
}

bool is_delim(char c) { return c == '.' || c == '_' || c == ' '; }

bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

int to_int(std::string_view s) {
    int v = 0;
    std::from_chars(s.data(), s.data() + s.size(), v);
    return v;
}

// The versioned default vocabulary; data/scene_tokens.txt ships the same
// content for researchers to extend.
constexpr const char* kBuiltinVocab = R"(# scene-tokens v1
resolution: 480p 576p 720p 1080p 1440p 2160p 4320p 4K 8K UHD=2160p
quality: CAM TS TC SCR SCREENER DVDSCR R5 DVDRip DVD HDTV PDTV SDTV WEBRip WEB-DL WEB BluRay BRRip BDRip REMUX HDRip VHSRip TVRip WEBDL=WEB-DL BLURAY=BluRay
codec: x264 x265 h264 h265 XviD DivX HEVC AVC AV1 VC-1
audio: AAC AC3 EAC3 DTS DTS-HD DTS-X TrueHD Atmos FLAC MP3 OPUS PCM DDP DD
language: ENGLISH FRENCH GERMAN SPANISH ITALIAN RUSSIAN POLISH HINDI KOREAN JAPANESE MANDARIN CHINESE DUTCH SWEDISH NORWEGIAN DANISH FINNISH PORTUGUESE ARABIC TURKISH CZECH HUNGARIAN MULTI NORDIC VOSTFR ENG=ENGLISH FRE=FRENCH GER=GERMAN ITA=ITALIAN RUS=RUSSIAN SPA=SPANISH
flag: REPACK=repack PROPER=proper INTERNAL=internal iNTERNAL=internal READNFO=readnfo UNRATED=unrated REMASTERED=remastered DOCUMENTARY=documentary 3D=3d WS=widescreen WIDESCREEN=widescreen HDR=hdr HDR10=hdr
video_ext: mkv mp4 avi mov wmv flv webm mpg mpeg m4v ts m2ts vob 3gp ogv divx rmvb
other_ext: nfo srt sub idx txt sfv md5 rar zip 7z par2 jpg jpeg png gif iso mp3 m3u flac cue torrent
)";

const std::pair<const char*, const char*> kFlagRender[] = {
    {"repack", "REPACK"},       {"proper", "PROPER"},
    {"internal", "iNTERNAL"},   {"readnfo", "READNFO"},
    {"unrated", "UNRATED"},     {"remastered", "REMASTERED"},
    {"directorsCut", "Directors.Cut"},
    {"internationalCut", "International.Cut"},
    {"documentary", "DOCUMENTARY"},
    {"3d", "3D"},               {"widescreen", "WS"},
    {"hdr", "HDR"},
};

struct EpisodePattern {
    int season = 0;
    int episode = 0;
    std::string extra; // unconsumed span remainder, e.g. "E02" of S01E01E02
};

// SxxEyy and friends: S01E02, s1e2, S01E01E02, S01E01-E02.
std::optional<EpisodePattern> match_sxxeyy(std::string_view t) {
    size_t i = 0;
    if (i >= t.size() || (t[i] != 's' && t[i] != 'S')) return std::nullopt;
    ++i;
    size_t sd = i;
    while (i < t.size() && std::isdigit(uint8_t(t[i])) && i - sd < 2) ++i;
    if (i == sd) return std::nullopt;
    if (i >= t.size() || (t[i] != 'e' && t[i] != 'E')) return std::nullopt;
    int season = to_int(t.substr(sd, i - sd));
    ++i;
    size_t ed = i;
    while (i < t.size() && std::isdigit(uint8_t(t[i])) && i - ed < 3) ++i;
    if (i == ed) return std::nullopt;
    EpisodePattern out;
    out.season = season;
    out.episode = to_int(t.substr(ed, i - ed));
    if (i < t.size()) {
        // multi-episode span: the remainder must look like (E|-)digits groups
        size_t j = i;
        while (j < t.size()) {
            if (t[j] == '-' || t[j] == 'e' || t[j] == 'E') {
                ++j;
                continue;
            }
            if (std::isdigit(uint8_t(t[j]))) {
                ++j;
                continue;
            }
            return std::nullopt;
        }
        out.extra = std::string(t.substr(i));
    }
    return out;
}

// 3x20 style.
std::optional<EpisodePattern> match_nxm(std::string_view t) {
    size_t x = t.find_first_of("xX");
    if (x == std::string_view::npos || x == 0 || x + 1 >= t.size()) return std::nullopt;
    std::string_view s = t.substr(0, x), e = t.substr(x + 1);
    if (!all_digits(s) || !all_digits(e)) return std::nullopt;
    if (s.size() > 2 || e.size() < 2 || e.size() > 3) return std::nullopt;
    EpisodePattern out;
    out.season = to_int(s);
    out.episode = to_int(e);
    return out;
}

bool is_episode_continuation(std::string_view t) {
    if (t.size() < 2 || (t[0] != 'e' && t[0] != 'E')) return false;
    return all_digits(t.substr(1));
}

} // namespace

// ---------------------------------------------------------------------------
// TokenVocabulary

void TokenVocabulary::add(TokenClass cls, std::string_view token, std::string_view canonical) {
    tokens_[lower(token)] = Hit{cls, std::string(canonical)};
}

void TokenVocabulary::add_video_extension(std::string_view ext) { video_ext_.insert(lower(ext)); }
void TokenVocabulary::add_other_extension(std::string_view ext) { other_ext_.insert(lower(ext)); }

std::optional<TokenVocabulary::Hit> TokenVocabulary::lookup(std::string_view token) const {
    auto it = tokens_.find(lower(token));
    if (it == tokens_.end()) return std::nullopt;
    return it->second;
}

bool TokenVocabulary::is_video_extension(std::string_view ext) const {
    return video_ext_.count(lower(ext)) > 0;
}

bool TokenVocabulary::is_known_extension(std::string_view ext) const {
    std::string l = lower(ext);
    return video_ext_.count(l) > 0 || other_ext_.count(l) > 0;
}

TokenVocabulary TokenVocabulary::parse_text(std::string_view text) {
    TokenVocabulary v;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            size_t vp = line.find(" v");
            if (vp != std::string::npos) {
                int ver = 0;
                auto sv = std::string_view(line).substr(vp + 2);
                std::from_chars(sv.data(), sv.data() + sv.size(), ver);
                if (ver > 0) v.version_ = ver;
            }
            continue;
        }
        size_t colon = line.find(':');
        if (colon == std::string::npos) throw std::runtime_error("token file: line missing class");
        std::string cls = line.substr(0, colon);
        std::istringstream toks(line.substr(colon + 1));
        std::string tok;
        while (toks >> tok) {
            std::string canonical = tok;
            size_t eq = tok.find('=');
            if (eq != std::string::npos) {
                canonical = tok.substr(eq + 1);
                tok = tok.substr(0, eq);
            }
            if (cls == "resolution") v.add(TokenClass::resolution, tok, canonical);
            else if (cls == "quality") v.add(TokenClass::quality, tok, canonical);
            else if (cls == "codec") v.add(TokenClass::codec, tok, canonical);
            else if (cls == "audio") v.add(TokenClass::audio, tok, canonical);
            else if (cls == "language") v.add(TokenClass::language, tok, canonical);
            else if (cls == "flag") v.add(TokenClass::flag, tok, canonical);
            else if (cls == "video_ext") v.add_video_extension(tok);
            else if (cls == "other_ext") v.add_other_extension(tok);
            else throw std::runtime_error("token file: unknown class " + cls);
        }
    }
    return v;
}

TokenVocabulary TokenVocabulary::builtin() { return parse_text(kBuiltinVocab); }

TokenVocabulary TokenVocabulary::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open token file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str());
}

// ---------------------------------------------------------------------------
// ReleaseNameParser

ReleaseNameParser::ReleaseNameParser() : ReleaseNameParser(TokenVocabulary::builtin()) {}

ReleaseNameParser::ReleaseNameParser(TokenVocabulary vocab) : vocab_(std::move(vocab)) {
    auto now = std::chrono::system_clock::now();
    auto days = std::chrono::floor<std::chrono::days>(now);
    std::chrono::year_month_day ymd(days);
    year_max_ = int(ymd.year()) + 1;
}

void ReleaseNameParser::set_year_bounds(int min_year, int max_year) {
    year_min_ = min_year;
    year_max_ = max_year;
}

FileClass ReleaseNameParser::classify_file(std::string_view path) const {
    FileClass out;
    size_t slash = path.find_last_of("/\\");
    std::string_view base = slash == std::string_view::npos ? path : path.substr(slash + 1);
    size_t dot = base.find_last_of('.');
    if (dot == std::string_view::npos || dot + 1 >= base.size()) return out;
    out.extension = lower(base.substr(dot + 1));
    out.is_video = vocab_.is_video_extension(out.extension);
    return out;
}

ParsedName ReleaseNameParser::parse(std::string_view name) const {
    ParsedName out;
    std::string work(name);

    // Container extension (known extensions only; the dot before it is
    // structural, not a delimiter).
    size_t dot = work.find_last_of('.');
    if (dot != std::string::npos && dot + 1 < work.size()) {
        std::string ext = work.substr(dot + 1);
        if (ext.find_first_of("._ ") == std::string::npos && vocab_.is_known_extension(ext)) {
            out.container_extension = lower(ext);
            work.resize(dot);
        }
    }

    // Leading bracketed site tag with a domain-looking dot: "[site.tld]".
    if (!work.empty() && work.front() == '[') {
        size_t close = work.find(']');
        if (close != std::string::npos && close > 1) {
            std::string inner = work.substr(1, close - 1);
            if (inner.find('.') != std::string::npos) {
                out.site = inner;
                size_t rest = close + 1;
                while (rest < work.size() && is_delim(work[rest])) ++rest;
                work.erase(0, rest);
            }
        }
    }

    // Trailing "-GROUP": the candidate must be a single clean token, and
    // neither it nor the hyphen compound it ends may be a known tag
    // (so "...WEB-DL" and "...-x264" never lose their tail to a group).
    size_t hyphen = work.rfind('-');
    if (hyphen != std::string::npos && hyphen + 1 < work.size() && hyphen > 0) {
        std::string candidate = work.substr(hyphen + 1);
        size_t tok_start = work.find_last_of("._ ", hyphen);
        std::string compound = work.substr(tok_start == std::string::npos ? 0 : tok_start + 1);
        bool candidate_clean = candidate.find_first_of("._ ") == std::string::npos;
        if (candidate_clean && !vocab_.lookup(candidate) && !vocab_.lookup(compound) &&
            !match_sxxeyy(candidate) && !is_episode_continuation(candidate) &&
            !(all_digits(candidate) && candidate.size() == 4)) {
            out.release_group = candidate;
            work.resize(hyphen);
        }
    }

    // Tokenize on delimiter runs.
    std::vector<std::string> tokens;
    {
        std::string cur;
        for (char c : work) {
            if (is_delim(c)) {
                if (!cur.empty()) tokens.push_back(std::move(cur));
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        if (!cur.empty()) tokens.push_back(std::move(cur));
    }

    const size_t n = tokens.size();
    std::vector<bool> consumed(n, false);
    int first_tag = -1;
    int episode_at = -1;

    auto is_year_token = [&](const std::string& t) {
        return t.size() == 4 && all_digits(t) && to_int(t) >= year_min_ && to_int(t) <= year_max_;
    };

    auto try_tag = [&](size_t i) -> bool {
        const std::string& t = tokens[i];
        std::string lt = lower(t);

        if (auto ep = match_sxxeyy(t)) {
            if (!out.season) {
                out.season = ep->season;
                out.episode = ep->episode;
                episode_at = int(i);
                if (!ep->extra.empty()) out.extras.emplace_back(ep->extra, int(i));
            } else {
                out.extras.emplace_back(t, int(i));
            }
            return true;
        }
        if (auto ep = match_nxm(t)) {
            if (!out.season) {
                out.season = ep->season;
                out.episode = ep->episode;
                episode_at = int(i);
            } else {
                out.extras.emplace_back(t, int(i));
            }
            return true;
        }
        // "Season X Episode Y" spans four tokens
        if (lt == "season" && i + 3 < n && all_digits(tokens[i + 1]) &&
            lower(tokens[i + 2]) == "episode" && all_digits(tokens[i + 3])) {
            if (!out.season) {
                out.season = to_int(tokens[i + 1]);
                out.episode = to_int(tokens[i + 3]);
                episode_at = int(i);
            }
            consumed[i + 1] = consumed[i + 2] = consumed[i + 3] = true;
            return true;
        }
        // two-token flags
        if (i + 1 < n) {
            std::string lt2 = lower(tokens[i + 1]);
            if ((lt == "directors" || lt == "director's") && lt2 == "cut") {
                out.flags.insert("directorsCut");
                consumed[i + 1] = true;
                return true;
            }
            if (lt == "international" && lt2 == "cut") {
                out.flags.insert("internationalCut");
                consumed[i + 1] = true;
                return true;
            }
            if (lt == "read" && lt2 == "nfo") {
                out.flags.insert("readnfo");
                consumed[i + 1] = true;
                return true;
            }
        }
        if (auto hit = vocab_.lookup(t)) {
            switch (hit->cls) {
            case TokenClass::resolution:
                if (!out.resolution) out.resolution = hit->canonical;
                else out.extras.emplace_back(t, int(i));
                return true;
            case TokenClass::quality:
                if (!out.source_quality) out.source_quality = hit->canonical;
                else out.extras.emplace_back(t, int(i));
                return true;
            case TokenClass::codec:
                if (!out.codec) out.codec = hit->canonical;
                else out.extras.emplace_back(t, int(i));
                return true;
            case TokenClass::audio:
                if (!out.audio) out.audio = hit->canonical;
                else out.extras.emplace_back(t, int(i));
                return true;
            case TokenClass::language:
                if (!out.language) out.language = hit->canonical;
                else out.extras.emplace_back(t, int(i));
                return true;
            case TokenClass::flag:
                out.flags.insert(hit->canonical);
                return true;
            }
        }
        if (is_year_token(t)) {
            if (!out.year) out.year = to_int(t);
            else out.extras.emplace_back(t, int(i));
            return true;
        }
        return false;
    };

    // First pass: find where the title ends.
    auto two_token_flag = [&](size_t i) {
        if (i + 1 >= n) return false;
        std::string a = lower(tokens[i]), b = lower(tokens[i + 1]);
        return ((a == "directors" || a == "director's") && b == "cut") ||
               (a == "international" && b == "cut") || (a == "read" && b == "nfo");
    };
    for (size_t i = 0; i < n; ++i) {
        std::string lt = lower(tokens[i]);
        bool tagish = match_sxxeyy(tokens[i]).has_value() || match_nxm(tokens[i]).has_value() ||
                      vocab_.lookup(tokens[i]).has_value() || is_year_token(tokens[i]) ||
                      two_token_flag(i) ||
                      (lt == "season" && i + 3 < n && all_digits(tokens[i + 1]) &&
                       lower(tokens[i + 2]) == "episode" && all_digits(tokens[i + 3]));
        if (tagish) {
            first_tag = int(i);
            break;
        }
    }

    // The title is the maximal untagged leading span; a name that starts
    // with a tag still gets a non-empty title from its first token.
    size_t title_end = first_tag < 0 ? n : size_t(first_tag);
    if (title_end == 0 && n > 0) title_end = 1;
    for (size_t i = 0; i < title_end; ++i) {
        if (!out.title.empty()) out.title.push_back(' ');
        out.title += tokens[i];
        consumed[i] = true;
    }

    // Second pass: tag everything after the title. Unrecognized tokens stay
    // unconsumed for now; the episode title claims the ones it wants.
    for (size_t i = title_end; i < n; ++i) {
        if (consumed[i]) continue;
        if (try_tag(i)) consumed[i] = true;
    }

    // Episode title: consecutive untagged tokens right after the episode tag.
    if (episode_at >= 0) {
        std::string et;
        size_t i = size_t(episode_at) + 1;
        // hop over the tokens the Season X Episode Y span consumed
        if (lower(tokens[size_t(episode_at)]) == "season")
            i = std::min(n, size_t(episode_at) + 4);
        for (; i < n && !consumed[i]; ++i) {
            if (!et.empty()) et.push_back(' ');
            et += tokens[i];
            consumed[i] = true;
        }
        if (!et.empty()) out.episode_title = et;
    }

    // Whatever is still unconsumed lands in extras.
    for (size_t i = title_end; i < n; ++i) {
        if (consumed[i]) continue;
        out.extras.emplace_back(tokens[i], int(i));
        consumed[i] = true;
    }
    std::sort(out.extras.begin(), out.extras.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });

    return out;
}

std::string ParsedName::render() const {
    auto dotted = [](std::string_view text) {
        std::string out;
        for (char c : text) out.push_back(c == ' ' ? '.' : c);
        return out;
    };
    std::string s = dotted(title);
    auto push = [&s](std::string_view part) {
        if (part.empty()) return;
        if (!s.empty()) s.push_back('.');
        s.append(part);
    };
    if (year) push(std::to_string(*year));
    if (season && episode) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "S%02dE%02d", *season, *episode);
        push(buf);
    }
    if (episode_title) push(dotted(*episode_title));
    for (const auto& [flag, token] : kFlagRender)
        if (flags.count(flag)) push(token);
    if (language) push(*language);
    if (resolution) push(*resolution);
    if (source_quality) push(*source_quality);
    if (audio) push(*audio);
    if (codec) push(*codec);
    if (release_group) {
        s.push_back('-');
        s.append(*release_group);
    }
    if (container_extension) {
        s.push_back('.');
        s.append(*container_extension);
    }
    if (site) s = "[" + *site + "]." + s;
    return s;
}

} // namespace btsup
