package fx.conv;

import com.thoughtworks.xstream.XStream;

public class Converter {
    public Object convert(String input) {
        Object widened = input;
        String rendered = String.valueOf(widened);
        XStream xs = new XStream();
        return xs.fromXML(rendered);
    }
}
