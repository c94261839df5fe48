export * from "./wire";
export * from "./wav";
export * from "./loopScheduler";
export * from "./survey";
export * from "./uploader";
export * from "./audioSink";
export * from "./client";
export { App } from "./components/App";
export { NowPlayingCard } from "./components/NowPlayingCard";
export { SurveyForm } from "./components/SurveyForm";
export { VolumeSlider } from "./components/VolumeSlider";
