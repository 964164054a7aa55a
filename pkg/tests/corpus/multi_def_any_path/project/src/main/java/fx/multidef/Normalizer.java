package fx.multidef;

import com.thoughtworks.xstream.XStream;

public class Normalizer {
    public Object normalize(String input, boolean strict) {
        String doc = input;
        if (strict) {
            doc = doc + "<!-- strict -->";
        }
        return new XStream().fromXML(doc);
    }
}
