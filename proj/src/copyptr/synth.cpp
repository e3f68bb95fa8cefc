// Copyright 2026 The copyptr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "copyptr/synth.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "copyptr/error.hpp"
#include "copyptr/random.hpp"

namespace copyptr {

namespace {

// Template syntax, space separated:
//   word           literal
//   (a|b_c|)       one alternative, '_' joins words, empty = nothing
//   {SLOT:pool}    slot filled from a value pool
//   {SLOT:@group}  slot holding a nested intent from a template group
struct Template {
  const char* intent;
  const char* text;
};

using Pool = std::vector<const char*>;

const std::map<std::string, Pool>& pools() {
  static const std::map<std::string, Pool> p = {
      {"datetime",
       {"tomorrow", "tonight", "at noon", "at 7 am", "at 6 30 pm", "on friday",
        "on monday morning", "this weekend", "next week", "tomorrow at 9",
        "in the morning", "every day at 8 am", "on july 4th", "at midnight",
        "this afternoon", "sunday night", "in two hours", "on the 15th",
        "next tuesday", "at 10 pm"}},
      {"location",
       {"paris", "boston", "chicago", "new york", "downtown", "the airport",
        "the office", "the mall", "seattle", "london", "the beach",
        "central park", "austin", "denver", "the library", "miami"}},
      {"contact",
       {"mom", "dad", "bill", "mindy", "john", "sarah", "my sister", "my boss",
        "grandma", "alex", "kevin", "the team", "lisa", "my brother"}},
      {"message",
       {"i am running late", "see you soon", "happy birthday", "call me back",
        "dinner is ready", "on my way", "yes", "no thanks", "love you",
        "the meeting moved", "bring snacks", "good luck today"}},
      {"todo",
       {"buy milk", "pay rent", "call the dentist", "water the plants",
        "pick up the kids", "take out the trash", "book flights",
        "renew my passport", "feed the cat", "do laundry", "pack lunch",
        "charge my phone", "return the books", "clean the garage"}},
      {"duration",
       {"5 minutes", "ten minutes", "an hour", "30 seconds", "two hours",
        "half an hour", "90 seconds", "15 minutes", "3 minutes", "45 minutes"}},
      {"artist",
       {"taylor swift", "drake", "the beatles", "adele", "coldplay", "queen",
        "beyonce", "miles davis", "nirvana", "rihanna"}},
      {"genre", {"jazz", "rock", "hip hop", "classical", "country", "pop", "blues"}},
      {"song",
       {"yesterday", "hello", "bad blood", "yellow", "bohemian rhapsody",
        "halo", "umbrella", "so what"}},
      {"playlist", {"workout", "road trip", "chill", "party", "focus"}},
      {"weather_attr",
       {"rain", "snow", "cold", "hot", "sunny", "windy", "humid", "cloudy"}},
      {"unit", {"celsius", "fahrenheit"}},
      {"event_cat", {"concert", "game", "festival", "party", "show", "meetup"}},
      {"event_name",
       {"eagles", "lakers", "jazz fest", "comic con", "marathon", "coachella",
        "red sox", "book club"}},
      {"alarm_name", {"wake up", "gym", "work", "nap", "medicine"}},
      {"timer_name", {"pasta", "laundry", "workout", "tea", "oven", "pizza"}},
      {"travel", {"driving", "walking", "bus", "biking"}},
  };
  return p;
}

// Pools that sometimes draw an invented word, so copying cannot be replaced
// by memorizing the pool.
bool open_pool(const std::string& name) {
  return name == "contact" || name == "location" || name == "event_name" ||
         name == "todo";
}

std::string invented_word(Rng& rng) {
  static const char* syllables[] = {"ka", "ri", "to", "mel", "an", "zo", "ve",
                                    "lu", "sen", "dra", "pi", "mo", "ter", "qui"};
  std::string w;
  const std::size_t n = 2 + uniform_index(rng, 2);
  for (std::size_t i = 0; i < n; ++i) w += syllables[uniform_index(rng, std::size(syllables))];
  return w;
}

const std::map<std::string, std::vector<Template>>& groups() {
  static const std::map<std::string, std::vector<Template>> g = {
      {"message_todo",
       {{"SEND_MESSAGE", "(text|message) {RECIPIENT:contact} {CONTENT_EXACT:message}"},
        {"SEND_MESSAGE", "tell {RECIPIENT:contact} (that|) {CONTENT_EXACT:message}"},
        {"SEND_MESSAGE", "send {RECIPIENT:contact} a message"}}},
      {"event",
       {{"GET_EVENT", "the {NAME_EVENT:event_name} {CATEGORY_EVENT:event_cat}"},
        {"GET_EVENT", "the {CATEGORY_EVENT:event_cat} in {LOCATION:location}"},
        {"GET_EVENT", "the {CATEGORY_EVENT:event_cat} {DATE_TIME:datetime}"}}},
      {"home",
       {{"GET_LOCATION_HOME", "{CONTACT:contact} 's (house|place)"},
        {"GET_LOCATION_HOME", "my (house|home)"}}},
  };
  return g;
}

const std::map<std::string, std::vector<Template>>& domain_templates() {
  static const std::map<std::string, std::vector<Template>> d = {
      {"alarm",
       {{"CREATE_ALARM", "(set|create|make) (an|a_new) alarm {DATE_TIME:datetime}"},
        {"CREATE_ALARM", "wake me up {DATE_TIME:datetime}"},
        {"CREATE_ALARM", "(set|create) a {ALARM_NAME:alarm_name} alarm {DATE_TIME:datetime}"},
        {"DELETE_ALARM", "(delete|cancel|remove) my alarm {DATE_TIME:datetime}"},
        {"DELETE_ALARM", "(delete|cancel) the {ALARM_NAME:alarm_name} alarm"},
        {"GET_ALARM", "what alarms do i have {DATE_TIME:datetime}"},
        {"GET_ALARM", "(show|list) my alarms"},
        {"SNOOZE_ALARM", "snooze (the_alarm|) for {DURATION:duration}"},
        {"SILENCE_ALARM", "(stop|silence|turn_off) the alarm"},
        {"CREATE_ALARM", "set an alarm (for|before) {DATE_TIME:@event}"}}},
      {"event",
       {{"GET_EVENT", "(find|show_me|are_there) {CATEGORY_EVENT:event_cat} events in {LOCATION:location} {DATE_TIME:datetime}"},
        {"GET_EVENT", "when is the {NAME_EVENT:event_name} {CATEGORY_EVENT:event_cat}"},
        {"GET_EVENT", "what is happening in {LOCATION:location} {DATE_TIME:datetime}"},
        {"GET_EVENT", "any {CATEGORY_EVENT:event_cat} {DATE_TIME:datetime}"},
        {"GET_EVENT_ATTENDEE", "who is going to the {NAME_EVENT:event_name} {CATEGORY_EVENT:event_cat}"},
        {"GET_EVENT_ATTENDEE", "is {ATTENDEE_EVENT:contact} going to the {CATEGORY_EVENT:event_cat} {DATE_TIME:datetime}"}}},
      {"messaging",
       {{"SEND_MESSAGE", "(text|message) {RECIPIENT:contact} {CONTENT_EXACT:message}"},
        {"SEND_MESSAGE", "tell {RECIPIENT:contact} (that|) {CONTENT_EXACT:message}"},
        {"SEND_MESSAGE", "text {CONTENT_EXACT:message} to {RECIPIENT:contact} and {RECIPIENT:contact}"},
        {"SEND_MESSAGE", "send a message to {RECIPIENT:contact} saying {CONTENT_EXACT:message}"},
        {"GET_MESSAGE", "(read|show) my messages from {SENDER:contact}"},
        {"GET_MESSAGE", "did {SENDER:contact} (text|message) me {DATE_TIME:datetime}"},
        {"SEND_MESSAGE", "tell {RECIPIENT:contact} i will be at {CONTENT_EXACT:@event}"}}},
      {"music",
       {{"PLAY_MUSIC", "play (some|) {MUSIC_GENRE:genre} (music|)"},
        {"PLAY_MUSIC", "play {MUSIC_TRACK_TITLE:song} by {MUSIC_ARTIST_NAME:artist}"},
        {"PLAY_MUSIC", "play (songs_by|) {MUSIC_ARTIST_NAME:artist}"},
        {"PAUSE_MUSIC", "(pause|stop) the music"},
        {"SKIP_TRACK_MUSIC", "(skip|next) (this_song|track)"},
        {"ADD_TO_PLAYLIST_MUSIC", "add this song to my {MUSIC_PLAYLIST_TITLE:playlist} playlist"},
        {"PLAY_MUSIC", "play my {MUSIC_PLAYLIST_TITLE:playlist} playlist"}}},
      {"navigation",
       {{"GET_DIRECTIONS", "(directions|driving_directions|how_do_i_get) to {DESTINATION:location}"},
        {"GET_DIRECTIONS", "(directions|how_do_i_get) to {DESTINATION:@event}"},
        {"GET_DIRECTIONS", "{METHOD_TRAVEL:travel} directions to {DESTINATION:location}"},
        {"GET_ESTIMATED_DURATION", "how long (will_it_take|is_the_drive) to {DESTINATION:location} {DATE_TIME:datetime}"},
        {"GET_ESTIMATED_DURATION", "how long to get to {DESTINATION:@home}"},
        {"GET_INFO_TRAFFIC", "(is_there|any) traffic (on_the_way|) to {DESTINATION:location}"},
        {"GET_INFO_TRAFFIC", "how is traffic in {LOCATION:location} {DATE_TIME:datetime}"}}},
      {"reminder",
       {{"CREATE_REMINDER", "remind me to {TODO:todo} {DATE_TIME:datetime}"},
        {"CREATE_REMINDER", "(set|create) a reminder (to|for_me_to) {TODO:todo} {DATE_TIME:datetime}"},
        {"CREATE_REMINDER", "remind {PERSON_REMINDED:contact} to {TODO:todo} {DATE_TIME:datetime}"},
        {"CREATE_REMINDER", "remind me {DATE_TIME:datetime} to {TODO:@message_todo}"},
        {"CREATE_REMINDER", "remind me to {TODO:@message_todo}"},
        {"CREATE_REMINDER", "remind me about {TODO:@event}"},
        {"GET_REMINDER", "(what_are|show) my reminders {DATE_TIME:datetime}"},
        {"DELETE_REMINDER", "(delete|cancel) (my|the) reminder to {TODO:todo}"}}},
      {"timer",
       {{"CREATE_TIMER", "(set|start) a timer for {DURATION:duration}"},
        {"CREATE_TIMER", "set a {TIMER_NAME:timer_name} timer for {DURATION:duration}"},
        {"GET_TIMER", "how much time is left (on_my_timer|)"},
        {"PAUSE_TIMER", "(pause|stop) the {TIMER_NAME:timer_name} timer"},
        {"DELETE_TIMER", "(cancel|delete) the timer"},
        {"ADD_TIME_TIMER", "add {DURATION:duration} to the timer"}}},
      {"weather",
       {{"GET_WEATHER", "what is the weather (like|) in {LOCATION:location} {DATE_TIME:datetime}"},
        {"GET_WEATHER", "will it {WEATHER_ATTRIBUTE:weather_attr} {DATE_TIME:datetime}"},
        {"GET_WEATHER", "is it going to be {WEATHER_ATTRIBUTE:weather_attr} in {LOCATION:location}"},
        {"GET_WEATHER", "weather {DATE_TIME:datetime} in {WEATHER_TEMPERATURE_UNIT:unit}"},
        {"GET_SUNSET", "when is sunset in {LOCATION:location}"},
        {"GET_SUNRISE", "what time is sunrise {DATE_TIME:datetime}"}}},
  };
  return d;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// Serialized-parse tokens and utterance words are emitted side by side.
struct Output {
  std::vector<std::string> words;
  std::vector<std::string> parse;

  void word(const std::string& w) {
    words.push_back(w);
    parse.push_back(w);
  }
};

void render(const Template& t, Rng& rng, Output& out);

void render_slot(const std::string& spec, Rng& rng, Output& out) {
  const auto colon = spec.find(':');
  const std::string slot_name = spec.substr(0, colon);
  const std::string source = spec.substr(colon + 1);
  out.parse.push_back("[SL:" + slot_name);
  if (source[0] == '@') {
    const auto& options = groups().at(source.substr(1));
    render(options[uniform_index(rng, options.size())], rng, out);
  } else if (open_pool(source) && uniform_index(rng, 4) == 0) {
    out.word(invented_word(rng));
  } else {
    const Pool& pool = pools().at(source);
    for (const std::string& w : split_on(pool[uniform_index(rng, pool.size())], ' ')) {
      out.word(w);
    }
  }
  out.parse.push_back("]");
}

void render(const Template& t, Rng& rng, Output& out) {
  out.parse.push_back(std::string("[IN:") + t.intent);
  for (const std::string& piece : split_on(t.text, ' ')) {
    if (piece.empty()) continue;
    if (piece.front() == '{') {
      render_slot(piece.substr(1, piece.size() - 2), rng, out);
    } else if (piece.front() == '(') {
      const auto options = split_on(piece.substr(1, piece.size() - 2), '|');
      for (const std::string& w : split_on(options[uniform_index(rng, options.size())], '_')) {
        if (!w.empty()) out.word(w);
      }
    } else {
      out.word(piece);
    }
  }
  out.parse.push_back("]");
}

void capitalize(std::string& word) {
  if (!word.empty()) {
    word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
  }
}

}  // namespace

std::vector<std::string> synth_domains() {
  std::vector<std::string> out;
  for (const auto& [name, unused] : domain_templates()) out.push_back(name);
  return out;
}

std::vector<SynthRecord> synth_records(std::string_view domain,
                                       std::size_t count, std::uint64_t seed) {
  auto it = domain_templates().find(std::string(domain));
  if (it == domain_templates().end()) {
    throw Error(ErrorCode::kUnknownDomain, "no synthetic grammar for " + std::string(domain));
  }
  const auto& templates = it->second;
  Rng rng(seed);
  std::vector<SynthRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Output o;
    render(templates[uniform_index(rng, templates.size())], rng, o);
    // Raw utterances start with a capital letter, as typed by a user; the
    // parse carries the same surface token.
    capitalize(o.words.front());
    for (std::string& tok : o.parse) {
      if (tok.front() != '[' && tok != "]") {
        capitalize(tok);
        break;
      }
    }
    out.push_back({std::string(domain), join(o.words), join(o.parse)});
  }
  return out;
}

void write_synth_corpus(const std::filesystem::path& dir,
                        const std::vector<std::string>& domains,
                        const SynthSizes& sizes, std::uint64_t seed) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string());
  const std::vector<std::string> all = synth_domains();
  const std::vector<std::string> names = domains.empty() ? all : domains;
  for (const std::string& name : names) {
    // Streams are keyed by the domain's position in the full list so a
    // subset reproduces the same files.
    const auto pos = static_cast<std::uint64_t>(
        std::find(all.begin(), all.end(), name) - all.begin());
    const std::size_t counts[] = {sizes.train, sizes.valid, sizes.test};
    const Split splits[] = {Split::kTrain, Split::kValid, Split::kTest};
    for (int s = 0; s < 3; ++s) {
      const auto records = synth_records(
          name, counts[s], derive_seed(seed, 1000 * (pos + 1) + static_cast<std::uint64_t>(s)));
      const auto path = domain_split_path(dir, name, splits[s]);
      std::ofstream out(path);
      if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
      for (const SynthRecord& r : records) {
        out << r.domain << '\t' << r.utterance << '\t' << r.parse << '\n';
      }
    }
  }
}

}  // namespace copyptr
